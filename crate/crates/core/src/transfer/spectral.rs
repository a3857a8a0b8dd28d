//! Leading eigen-triple of a nonnegative transfer matrix by power iteration,
//! with a deflated Arnoldi iteration for the modulus of the second eigenvalue.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::matrix::TransferMatrix;
use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-13;
pub const DEFAULT_MAX_ITER: usize = 1_000_000;

const ARNOLDI_DIM: usize = 48;
const ARNOLDI_RESTARTS: usize = 64;
const ARNOLDI_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralTriple {
    pub lambda: f64,
    /// Right eigenvector, `ν₀(phi) = 1`.
    pub phi: Vec<f64>,
    /// Left eigenvector, `Σ nuᵢ phiᵢ = 1`.
    pub nu: Vec<f64>,
    /// `1 − |λ₂|/λ`.
    pub gap: f64,
    pub second_modulus: f64,
    pub iterations: usize,
    pub residual: f64,
    pub residual_left: f64,
    /// Zero or nilpotent matrix: `lambda = 0`, eigenvectors empty.
    pub degenerate: bool,
}

/// JSON record for a spectral solve.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SpectralSummary {
    pub lambda: f64,
    pub gap: f64,
    pub iterations: usize,
    pub residual: f64,
}

impl SpectralTriple {
    pub fn summary(&self) -> SpectralSummary {
        SpectralSummary {
            lambda: self.lambda,
            gap: self.gap,
            iterations: self.iterations,
            residual: self.residual.max(self.residual_left),
        }
    }

    /// `ν_ε(f)` for a density vector `f`.
    pub fn nu_of(&self, f: &[f64]) -> f64 {
        self.nu.iter().zip(f).map(|(a, b)| a * b).sum()
    }
}

/// `−log λ`.
pub fn escape_rate(triple: &SpectralTriple) -> Result<f64> {
    if triple.lambda <= 0.0 {
        return Err(Error::InfiniteEscape);
    }
    Ok(-triple.lambda.ln())
}

/// Strongly connected components with at least one internal edge, each
/// returned with its period.
pub(crate) fn recurrent_components(succ: &[Vec<usize>]) -> Vec<(Vec<usize>, usize)> {
    let n = succ.len();
    // Iterative Tarjan.
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut next = 0usize;
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if *pos < succ[v].len() {
                let w = succ[v][*pos];
                *pos += 1;
                if index[w] == usize::MAX {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comps.push(comp);
                }
            }
        }
    }
    let mut member = vec![usize::MAX; n];
    for (c, comp) in comps.iter().enumerate() {
        for &v in comp {
            member[v] = c;
        }
    }
    comps
        .into_iter()
        .enumerate()
        .filter(|(c, comp)| comp.iter().any(|&v| succ[v].iter().any(|&w| member[w] == *c)))
        .map(|(c, comp)| {
            let period = component_period(succ, &comp, &member, c);
            (comp, period)
        })
        .collect()
}

fn component_period(succ: &[Vec<usize>], comp: &[usize], member: &[usize], c: usize) -> usize {
    let mut level = vec![usize::MAX; succ.len()];
    let start = comp[0];
    level[start] = 0;
    let mut queue = std::collections::VecDeque::from([start]);
    let mut g = 0usize;
    while let Some(v) = queue.pop_front() {
        for &w in &succ[v] {
            if member[w] != c {
                continue;
            }
            if level[w] == usize::MAX {
                level[w] = level[v] + 1;
                queue.push_back(w);
            } else {
                g = gcd(g, (level[v] + 1).abs_diff(level[w]));
            }
        }
    }
    g.max(1)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

struct PowerResult {
    lambda: f64,
    vector: Vec<f64>,
    iterations: usize,
}

/// Power iteration for `op` (optionally shifted by the identity), with the
/// vector normalized by the positive weights `pairing`.
fn power_iterate<F>(
    dim: usize,
    pairing: &[f64],
    shift: f64,
    tol: f64,
    max_iter: usize,
    op: F,
) -> Result<PowerResult>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let norm = |v: &[f64]| -> f64 { pairing.iter().zip(v).map(|(w, x)| w * x.abs()).sum() };
    let mut v = vec![1.0; dim];
    let n0 = norm(&v);
    v.iter_mut().for_each(|x| *x /= n0);
    let mut lambda_prev = f64::NAN;
    let mut last_change = f64::INFINITY;
    for it in 1..=max_iter {
        let mut w = op(&v);
        if shift != 0.0 {
            w.iter_mut().zip(&v).for_each(|(a, b)| *a += shift * b);
        }
        let nw = norm(&w);
        if nw == 0.0 {
            return Ok(PowerResult {
                lambda: 0.0,
                vector: Vec::new(),
                iterations: it,
            });
        }
        w.iter_mut().for_each(|x| *x /= nw);
        let dv: f64 = pairing
            .iter()
            .zip(w.iter().zip(&v))
            .map(|(p, (a, b))| p * (a - b).abs())
            .sum();
        let lambda = nw - shift;
        let dl = (lambda - lambda_prev).abs();
        last_change = dl.max(dv);
        v = w;
        if dl < tol * lambda.abs().max(1.0) && dv < tol.max(1e-15) * 10.0 {
            return Ok(PowerResult {
                lambda,
                vector: v,
                iterations: it,
            });
        }
        lambda_prev = lambda;
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        last_change,
    })
}

/// Leading eigenvalue with right and left eigenvectors and a gap estimate.
pub fn leading_triple(m: &TransferMatrix, tol: f64, max_iter: usize) -> Result<SpectralTriple> {
    let dim = m.dim();
    let comps = recurrent_components(&m.successors());
    let degenerate = SpectralTriple {
        lambda: 0.0,
        phi: Vec::new(),
        nu: Vec::new(),
        gap: 1.0,
        second_modulus: 0.0,
        iterations: 0,
        residual: 0.0,
        residual_left: 0.0,
        degenerate: true,
    };
    let period = match comps.as_slice() {
        [] => return Ok(degenerate),
        [(_, p)] => *p,
        many => return Err(Error::Reducible { components: many.len() }),
    };
    let shift = if period > 1 { 1.0 } else { 0.0 };
    let lengths = m.grid().lengths().to_vec();

    let right = power_iterate(dim, &lengths, shift, tol, max_iter, |v| m.apply(v))?;
    if right.lambda <= 0.0 || right.vector.is_empty() {
        return Ok(SpectralTriple {
            iterations: right.iterations,
            ..degenerate
        });
    }
    let ones = vec![1.0; dim];
    let left = power_iterate(dim, &ones, shift, tol, max_iter, |w| m.apply_transpose(w))?;
    let lambda = right.lambda;

    let mut phi = right.vector;
    phi.iter_mut().for_each(|x| *x = x.max(0.0));
    let nphi: f64 = lengths.iter().zip(&phi).map(|(l, x)| l * x).sum();
    phi.iter_mut().for_each(|x| *x /= nphi);
    let mut nu = left.vector;
    nu.iter_mut().for_each(|x| *x = x.max(0.0));
    let nu_phi: f64 = nu.iter().zip(&phi).map(|(a, b)| a * b).sum();
    nu.iter_mut().for_each(|x| *x /= nu_phi);

    let mphi = m.apply(&phi);
    let residual = mphi
        .iter()
        .zip(&phi)
        .zip(&lengths)
        .map(|((a, b), l)| l * (a - lambda * b).abs())
        .sum();
    let num = m.apply_transpose(&nu);
    let residual_left = num.iter().zip(&nu).map(|(a, b)| (a - lambda * b).abs()).sum();

    let second_modulus = second_eigen_modulus(m, &phi, &nu);
    Ok(SpectralTriple {
        lambda,
        gap: (1.0 - second_modulus / lambda).clamp(0.0, 1.0),
        second_modulus,
        phi,
        nu,
        iterations: right.iterations.max(left.iterations),
        residual,
        residual_left,
        degenerate: false,
    })
}

/// Largest Ritz modulus of `Q = (I − φ ⊗ ν) M` from restarted Arnoldi. Exact
/// when the Krylov space becomes invariant, which it does for small grids.
fn second_eigen_modulus(m: &TransferMatrix, phi: &[f64], nu: &[f64]) -> f64 {
    let dim = m.dim();
    let project = |v: &mut Vec<f64>| {
        let c = dot(nu, v);
        v.iter_mut().zip(phi).for_each(|(x, p)| *x -= c * p);
    };
    let apply_q = |v: &[f64]| {
        let mut w = m.apply(v);
        project(&mut w);
        w
    };
    let mut v: Vec<f64> = (0..dim)
        .map(|i| 1.0 + 0.5 * ((i as f64) * 1.234_567 + 0.1).sin())
        .collect();
    project(&mut v);
    let k = dim.min(ARNOLDI_DIM);
    let mut prev = f64::NAN;
    for _ in 0..ARNOLDI_RESTARTS {
        let nv = norm(&v);
        if nv < 1e-300 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        let mut basis = vec![v.clone()];
        let mut h = DMatrix::<f64>::zeros(k + 1, k);
        let mut size = k;
        for j in 0..k {
            let mut w = apply_q(&basis[j]);
            let scale = norm(&w);
            for _ in 0..2 {
                for (i, b) in basis.iter().enumerate() {
                    let c = dot(b, &w);
                    h[(i, j)] += c;
                    w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
                }
            }
            let nw = norm(&w);
            h[(j + 1, j)] = nw;
            if nw <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
                size = j + 1;
                break;
            }
            w.iter_mut().for_each(|x| *x /= nw);
            basis.push(w);
        }
        let est = h
            .view((0, 0), (size, size))
            .into_owned()
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if size < k || (est - prev).abs() <= ARNOLDI_REL_TOL * est {
            return est;
        }
        prev = est;
        // Filter toward the outer spectrum before restarting.
        v = basis.swap_remove(size - 1);
        for _ in 0..k {
            v = apply_q(&v);
            let nv = norm(&v);
            if nv < 1e-300 {
                return est;
            }
            v.iter_mut().for_each(|x| *x /= nv);
        }
    }
    prev
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}
