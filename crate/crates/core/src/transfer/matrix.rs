use std::io::{self, Write};

use num_traits::{Signed, Zero};

use super::grid::{UlamGrid, DEFAULT_MARKOV_CAP};
use crate::error::Result;
use crate::maps::{Hole, IntervalMap};
use crate::real::{to_f64, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    Closed,
    Open,
}

/// Finite-rank transfer operator acting on bin densities (column vectors).
///
/// `M[i][j] = Leb(B_j ∩ T⁻¹B_i) / Leb(B_i)`. With this orientation the
/// `ν₀`-pairing is preserved by the closed operator:
/// `Σ_i Lᵢ M[i][j] = L_j`.
#[derive(Debug, Clone)]
pub struct TransferMatrix {
    grid: UlamGrid,
    /// Column-compressed `(row, value)` lists.
    cols: Vec<Vec<(usize, f64)>>,
    exact: Vec<Vec<(usize, Rational)>>,
    kind: MatrixKind,
    hole: Option<Hole>,
}

/// Ulam discretization, exact in rational arithmetic for affine branches.
pub fn assemble_ulam(map: &IntervalMap, grid: &UlamGrid) -> TransferMatrix {
    let m = grid.bins();
    let edges = grid.edges();
    let mut exact: Vec<Vec<(usize, Rational)>> = vec![Vec::new(); m];
    for (j, col) in exact.iter_mut().enumerate() {
        let (a, b) = (&edges[j], &edges[j + 1]);
        for br in map.branches() {
            let x0 = a.max(br.lo());
            let x1 = b.min(br.hi());
            if x0 >= x1 {
                continue;
            }
            let (u, v) = (br.apply(x0), br.apply(x1));
            let (y0, y1) = if u <= v { (u, v) } else { (v, u) };
            let inv_slope = br.slope().abs().recip();
            for i in grid.bins_overlapping(&y0, &y1) {
                let lo = (&y0).max(&edges[i]);
                let hi = (&y1).min(&edges[i + 1]);
                if lo >= hi {
                    continue;
                }
                let w = (hi - lo) * &inv_slope / grid.bin_length(i);
                match col.iter_mut().find(|(r, _)| *r == i) {
                    Some((_, acc)) => *acc += w,
                    None => col.push((i, w)),
                }
            }
        }
        col.sort_by_key(|(r, _)| *r);
    }
    TransferMatrix::from_exact(grid.clone(), exact, MatrixKind::Closed, None)
}

/// Exact matrix on the Markov partition generated by the branch endpoints.
pub fn assemble_markov_exact(map: &IntervalMap) -> Result<TransferMatrix> {
    let grid = UlamGrid::markov(map, &[], DEFAULT_MARKOV_CAP)?;
    Ok(assemble_ulam(map, &grid))
}

/// Exact matrix on the Markov partition generated by the branch endpoints
/// and the hole endpoints, so that the hole is a union of cells.
pub fn assemble_markov_for_hole(map: &IntervalMap, hole: &Hole, cap: usize) -> Result<TransferMatrix> {
    let extra: Vec<Rational> = hole.intervals().endpoints().cloned().collect();
    let grid = UlamGrid::markov(map, &extra, cap)?;
    Ok(assemble_ulam(map, &grid))
}

impl TransferMatrix {
    fn from_exact(
        grid: UlamGrid,
        exact: Vec<Vec<(usize, Rational)>>,
        kind: MatrixKind,
        hole: Option<Hole>,
    ) -> Self {
        let cols = exact
            .iter()
            .map(|c| c.iter().map(|(r, v)| (*r, to_f64(v))).collect())
            .collect();
        Self {
            grid,
            cols,
            exact,
            kind,
            hole,
        }
    }

    pub fn dim(&self) -> usize {
        self.cols.len()
    }

    pub fn grid(&self) -> &UlamGrid {
        &self.grid
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn hole(&self) -> Option<&Hole> {
        self.hole.as_ref()
    }

    /// Exact when the grid is a Markov partition for the map (and hole).
    pub fn is_markov_exact(&self) -> bool {
        self.grid.is_markov()
    }

    pub fn columns(&self) -> &[Vec<(usize, f64)>] {
        &self.cols
    }

    pub fn exact_columns(&self) -> &[Vec<(usize, Rational)>] {
        &self.exact
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.cols[j]
            .iter()
            .find(|(r, _)| *r == i)
            .map_or(0.0, |(_, v)| *v)
    }

    pub fn exact_entry(&self, i: usize, j: usize) -> Rational {
        self.exact[j]
            .iter()
            .find(|(r, _)| *r == i)
            .map_or_else(Rational::zero, |(_, v)| v.clone())
    }

    pub fn nnz(&self) -> usize {
        self.cols.iter().map(Vec::len).sum()
    }

    /// `M v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.apply_into(v, &mut out);
        out
    }

    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (col, &vj) in self.cols.iter().zip(v) {
            if vj == 0.0 {
                continue;
            }
            for &(i, mij) in col {
                out[i] += mij * vj;
            }
        }
    }

    /// `wᵀ M`.
    pub fn apply_transpose(&self, w: &[f64]) -> Vec<f64> {
        self.cols
            .iter()
            .map(|col| col.iter().map(|&(i, mij)| w[i] * mij).sum())
            .collect()
    }

    /// `Σ_i Lᵢ M[i][j] / L_j` for each column; all ones for a closed operator.
    pub fn column_pairing_sums(&self) -> Vec<f64> {
        let lengths = self.grid.lengths();
        self.cols
            .iter()
            .enumerate()
            .map(|(j, col)| col.iter().map(|&(i, v)| lengths[i] * v).sum::<f64>() / lengths[j])
            .collect()
    }

    /// `P_ε f = P₀(1_{M∖A} f)`: column `j` is scaled by `Leb(B_j ∖ A)/Leb(B_j)`.
    pub fn open(&self, hole: &Hole) -> TransferMatrix {
        let edges = self.grid.edges();
        let exact = self
            .exact
            .iter()
            .enumerate()
            .map(|(j, col)| {
                let len = self.grid.bin_length(j);
                let covered = hole.intervals().overlap(&edges[j], &edges[j + 1]);
                let keep = (&len - covered) / &len;
                if keep.is_zero() {
                    Vec::new()
                } else {
                    col.iter().map(|(r, v)| (*r, v * &keep)).collect()
                }
            })
            .collect();
        let merged = match &self.hole {
            Some(h) => Hole::from_intervals(h.intervals().union(hole.intervals())),
            None => hole.clone(),
        };
        let mut open = Self::from_exact(self.grid.clone(), exact, MatrixKind::Open, Some(merged));
        open.cols.iter_mut().for_each(|c| c.retain(|(_, v)| *v != 0.0));
        open
    }

    /// Directed sparsity graph: edge `j → i` when `M[i][j] > 0`.
    pub fn successors(&self) -> Vec<Vec<usize>> {
        self.exact
            .iter()
            .map(|c| c.iter().filter(|(_, v)| v.is_positive()).map(|(r, _)| *r).collect())
            .collect()
    }

    /// Sparse triplets `row,col,value` with a header line.
    pub fn write_triplets_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "row,col,value")?;
        for (j, col) in self.cols.iter().enumerate() {
            for &(i, v) in col {
                writeln!(out, "{i},{j},{v:.16e}")?;
            }
        }
        Ok(())
    }
}
