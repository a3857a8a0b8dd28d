//! Subshifts of finite type: entropy, the Parry measure, and entropy drops
//! under block deletion.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transfer::recurrent_components;

/// Largest state space `A^m` a presentation may enumerate.
pub const STATE_CAP: u64 = 1 << 22;
pub const MAX_ALPHABET: usize = 256;

const EIGEN_TOL: f64 = 1e-14;
/// Accepted when the iteration has stalled at round-off level.
const EIGEN_STALL_TOL: f64 = 1e-12;
const EIGEN_STALL_WINDOW: usize = 1000;
const EIGEN_MAX_ITER: usize = 1_000_000;

pub type Word = Vec<u8>;

/// A word written as a digit string (alphabets up to 10) or as an array of
/// symbol indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WordSpec {
    Digits(String),
    Symbols(Vec<u32>),
}

impl WordSpec {
    pub fn to_word(&self, alphabet: usize) -> Result<Word> {
        let syms: Vec<u32> = match self {
            WordSpec::Digits(s) => s
                .chars()
                .map(|c| c.to_digit(10).ok_or_else(|| Error::invalid(format!("'{c}' is not a digit"))))
                .collect::<Result<_>>()?,
            WordSpec::Symbols(v) => v.clone(),
        };
        if syms.is_empty() {
            return Err(Error::invalid("words must be nonempty"));
        }
        syms.into_iter()
            .map(|s| {
                if (s as usize) < alphabet {
                    Ok(s as u8)
                } else {
                    Err(Error::invalid(format!("symbol {s} outside alphabet of size {alphabet}")))
                }
            })
            .collect()
    }
}

/// JSON form: `{"alphabet": A, "forbidden_blocks": [...]}` or
/// `{"alphabet": A, "matrix": [[0/1, ...], ...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SftSpec {
    pub alphabet: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forbidden_blocks: Option<Vec<WordSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<u8>>>,
}

impl SftSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid(format!("SFT spec: {e}")))
    }

    pub fn build(&self) -> Result<Sft> {
        match (&self.forbidden_blocks, &self.matrix) {
            (Some(_), Some(_)) => Err(Error::invalid("give either forbidden_blocks or matrix, not both")),
            (None, Some(m)) if m.len() != self.alphabet => Err(Error::invalid(format!(
                "matrix is {0}×{0} but the alphabet has {1} symbols",
                m.len(),
                self.alphabet
            ))),
            (None, Some(m)) => Sft::from_matrix(m),
            (f, None) => {
                let words = f
                    .iter()
                    .flatten()
                    .map(|w| w.to_word(self.alphabet))
                    .collect::<Result<Vec<_>>>()?;
                Sft::new(self.alphabet, words)
            }
        }
    }
}

/// Parses an SFT spec from JSON.
pub fn parse_sft(text: &str) -> Result<Sft> {
    SftSpec::from_json(text)?.build()
}

/// A shift space given by an alphabet and a list of forbidden blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sft {
    alphabet: usize,
    forbidden: Vec<Word>,
}

impl Sft {
    pub fn new(alphabet: usize, forbidden: Vec<Word>) -> Result<Self> {
        if alphabet == 0 || alphabet > MAX_ALPHABET {
            return Err(Error::invalid(format!("alphabet size must be in 1..={MAX_ALPHABET}")));
        }
        for w in &forbidden {
            if w.is_empty() {
                return Err(Error::invalid("forbidden blocks must be nonempty"));
            }
            if let Some(&s) = w.iter().find(|&&s| s as usize >= alphabet) {
                return Err(Error::invalid(format!("symbol {s} outside alphabet of size {alphabet}")));
            }
        }
        let mut seen = HashSet::new();
        let forbidden = forbidden.into_iter().filter(|w| seen.insert(w.clone())).collect();
        Ok(Self { alphabet, forbidden })
    }

    pub fn full(alphabet: usize) -> Result<Self> {
        Self::new(alphabet, Vec::new())
    }

    /// Forbids the 2-blocks `ij` with `m[i][j] = 0`.
    pub fn from_matrix(m: &[Vec<u8>]) -> Result<Self> {
        let a = m.len();
        if m.iter().any(|row| row.len() != a) {
            return Err(Error::invalid("transition matrix must be square"));
        }
        if m.iter().flatten().any(|&v| v > 1) {
            return Err(Error::invalid("transition matrix entries must be 0 or 1"));
        }
        if a > MAX_ALPHABET {
            return Err(Error::invalid(format!("alphabet size must be in 1..={MAX_ALPHABET}")));
        }
        let mut forbidden = Vec::new();
        for (i, row) in m.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v == 0 {
                    forbidden.push(vec![i as u8, j as u8]);
                }
            }
        }
        Self::new(a, forbidden)
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn forbidden(&self) -> &[Word] {
        &self.forbidden
    }

    pub fn max_forbidden_len(&self) -> usize {
        self.forbidden.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Smallest order at which the shift is a vertex shift on words.
    pub fn natural_order(&self) -> usize {
        self.max_forbidden_len().saturating_sub(1).max(1)
    }

    pub fn presentation(&self) -> Result<Presentation> {
        Presentation::new(self, self.natural_order())
    }

    /// True when `w` occurs in some point of the shift.
    pub fn is_allowed(&self, w: &[u8]) -> Result<bool> {
        if w.iter().any(|&s| s as usize >= self.alphabet) || w.is_empty() {
            return Ok(false);
        }
        let p = Presentation::new(self, self.natural_order().max(w.len()))?;
        let found = p.prefix_states(w).next().is_some();
        Ok(found)
    }
}

/// Higher-block presentation: states are the allowed words of length
/// `order`, with an edge `s → t` when `s` and `t` overlap in `order − 1`
/// symbols and their union is allowed. States on no bi-infinite path are
/// removed.
#[derive(Debug, Clone)]
pub struct Presentation {
    alphabet: usize,
    order: usize,
    /// Base-`alphabet` code of each state's word.
    codes: Vec<u64>,
    succ: Vec<Vec<usize>>,
}

fn encode(w: &[u8], a: u64) -> u64 {
    w.iter().fold(0, |acc, &s| acc * a + s as u64)
}

fn decode(mut code: u64, a: u64, len: usize) -> Word {
    let mut w = vec![0u8; len];
    for slot in w.iter_mut().rev() {
        *slot = (code % a) as u8;
        code /= a;
    }
    w
}

fn contains_block(w: &[u8], blocks: &[Word]) -> bool {
    blocks.iter().any(|b| b.len() <= w.len() && w.windows(b.len()).any(|x| x == b.as_slice()))
}

impl Presentation {
    pub fn new(sft: &Sft, order: usize) -> Result<Self> {
        if order < sft.natural_order() {
            return Err(Error::invalid("presentation order below the longest forbidden block"));
        }
        let a = sft.alphabet as u64;
        let space = (0..order).try_fold(1u64, |acc, _| acc.checked_mul(a).filter(|&v| v <= STATE_CAP));
        let space = space.ok_or_else(|| Error::invalid(format!("presentation needs more than {STATE_CAP} states")))?;
        let mut index = vec![usize::MAX; space as usize];
        let mut codes = Vec::new();
        for code in 0..space {
            if !contains_block(&decode(code, a, order), &sft.forbidden) {
                index[code as usize] = codes.len();
                codes.push(code);
            }
        }
        let long: Vec<Word> = sft.forbidden.iter().filter(|b| b.len() == order + 1).cloned().collect();
        let mut succ = vec![Vec::new(); codes.len()];
        for (i, &code) in codes.iter().enumerate() {
            let mut word = decode(code, a, order);
            word.push(0);
            for s in 0..a {
                let t = (code * a + s) % space;
                let j = index[t as usize];
                if j == usize::MAX {
                    continue;
                }
                word[order] = s as u8;
                if !long.iter().any(|b| b.as_slice() == word.as_slice()) {
                    succ[i].push(j);
                }
            }
        }
        let mut p = Self {
            alphabet: sft.alphabet,
            order,
            codes,
            succ,
        };
        p.trim();
        if p.codes.is_empty() {
            return Err(Error::invalid("the shift is empty"));
        }
        Ok(p)
    }

    /// Removes states without predecessors or successors until none remain.
    fn trim(&mut self) {
        let n = self.codes.len();
        let mut alive = vec![true; n];
        loop {
            let mut indeg = vec![0usize; n];
            let mut outdeg = vec![0usize; n];
            for (i, s) in self.succ.iter().enumerate() {
                if !alive[i] {
                    continue;
                }
                for &j in s {
                    if alive[j] {
                        outdeg[i] += 1;
                        indeg[j] += 1;
                    }
                }
            }
            let mut changed = false;
            for i in 0..n {
                if alive[i] && (indeg[i] == 0 || outdeg[i] == 0) {
                    alive[i] = false;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let mut remap = vec![usize::MAX; n];
        let mut codes = Vec::new();
        for i in 0..n {
            if alive[i] {
                remap[i] = codes.len();
                codes.push(self.codes[i]);
            }
        }
        let succ = (0..n)
            .filter(|&i| alive[i])
            .map(|i| self.succ[i].iter().filter(|&&j| alive[j]).map(|&j| remap[j]).collect())
            .collect();
        self.codes = codes;
        self.succ = succ;
    }

    pub fn states(&self) -> usize {
        self.codes.len()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn word(&self, state: usize) -> Word {
        decode(self.codes[state], self.alphabet as u64, self.order)
    }

    pub fn successors(&self) -> &[Vec<usize>] {
        &self.succ
    }

    /// Dense 0/1 matrix, for small presentations.
    pub fn matrix(&self) -> Vec<Vec<u8>> {
        let n = self.states();
        let mut m = vec![vec![0u8; n]; n];
        for (i, s) in self.succ.iter().enumerate() {
            for &j in s {
                m[i][j] = 1;
            }
        }
        m
    }

    /// States whose word starts with `w` (`|w| ≤ order`).
    fn prefix_states<'a>(&'a self, w: &'a [u8]) -> impl Iterator<Item = usize> + 'a {
        let a = self.alphabet as u64;
        let ok = w.len() <= self.order;
        let shift = a.pow((self.order - w.len().min(self.order)) as u32);
        let target = encode(w, a);
        (0..self.states()).filter(move |&i| ok && self.codes[i] / shift == target)
    }

    /// Checks irreducibility and aperiodicity.
    pub fn check_primitive(&self) -> Result<()> {
        let comps = recurrent_components(&self.succ);
        match comps.as_slice() {
            [(members, period)] if members.len() == self.states() => {
                if *period == 1 {
                    Ok(())
                } else {
                    Err(Error::Periodic { period: *period })
                }
            }
            _ => Err(Error::Reducible {
                components: comps.len().max(2),
            }),
        }
    }

    /// Perron data of the 0/1 matrix: `λ`, right `r`, left `l` with `l·r = 1`.
    pub fn perron(&self) -> Result<Perron> {
        self.check_primitive()?;
        let n = self.states();
        let right = iterate(n, |v, out| {
            for (i, s) in self.succ.iter().enumerate() {
                out[i] = s.iter().map(|&j| v[j]).sum();
            }
        })?;
        let left = iterate(n, |v, out| {
            out.iter_mut().for_each(|x| *x = 0.0);
            for (i, s) in self.succ.iter().enumerate() {
                for &j in s {
                    out[j] += v[i];
                }
            }
        })?;
        let (lambda, r) = right;
        let (_, mut l) = left;
        let lr: f64 = l.iter().zip(&r).map(|(a, b)| a * b).sum();
        l.iter_mut().for_each(|x| *x /= lr);
        Ok(Perron { lambda, right: r, left: l })
    }
}

/// Power iteration with sum normalization; returns `(λ, vector)`.
fn iterate(n: usize, apply: impl Fn(&[f64], &mut [f64])) -> Result<(f64, Vec<f64>)> {
    let mut v = vec![1.0 / n as f64; n];
    let mut out = vec![0.0; n];
    let mut last_change = f64::INFINITY;
    let (mut best, mut best_at) = (f64::INFINITY, 0);
    for it in 0..EIGEN_MAX_ITER {
        apply(&v, &mut out);
        let lambda: f64 = out.iter().sum();
        if !(lambda > 0.0) {
            return Ok((0.0, v));
        }
        out.iter_mut().for_each(|x| *x /= lambda);
        let vmax = out.iter().cloned().fold(0.0, f64::max);
        last_change = v.iter().zip(&out).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / vmax;
        std::mem::swap(&mut v, &mut out);
        if last_change < best {
            best = last_change;
            best_at = it;
        }
        let stalled = best <= EIGEN_STALL_TOL && it - best_at > EIGEN_STALL_WINDOW;
        if (last_change <= EIGEN_TOL && it > 2) || stalled {
            apply(&v, &mut out);
            return Ok((out.iter().sum(), v));
        }
    }
    Err(Error::NoConvergence {
        iterations: EIGEN_MAX_ITER,
        last_change,
    })
}

#[derive(Debug, Clone)]
pub struct Perron {
    pub lambda: f64,
    pub right: Vec<f64>,
    pub left: Vec<f64>,
}

/// `log λ` of the transition matrix of a primitive presentation.
pub fn topological_entropy(sft: &Sft) -> Result<f64> {
    Ok(sft.presentation()?.perron()?.lambda.ln())
}

/// The shift with `block` forbidden in addition.
pub fn delete_block(sft: &Sft, block: &[u8]) -> Result<Sft> {
    if !sft.is_allowed(block)? {
        return Err(Error::BlockForbidden(word_string(block)));
    }
    let mut forbidden = sft.forbidden.clone();
    forbidden.push(block.to_vec());
    Sft::new(sft.alphabet, forbidden)
}

/// True when a proper suffix of `u` is a prefix of `v`, or one contains the other.
fn overlaps(u: &[u8], v: &[u8]) -> bool {
    let proper = |a: &[u8], b: &[u8]| (1..a.len().min(b.len())).any(|k| a[a.len() - k..] == b[..k]);
    contains_block(u, std::slice::from_ref(&v.to_vec()))
        || contains_block(v, std::slice::from_ref(&u.to_vec()))
        || proper(u, v)
        || proper(v, u)
}

/// Deletes several blocks; pairwise overlapping sets are rejected.
pub fn delete_blocks(sft: &Sft, blocks: &[Word]) -> Result<Sft> {
    for (i, u) in blocks.iter().enumerate() {
        for v in &blocks[i + 1..] {
            if overlaps(u, v) {
                return Err(Error::invalid(format!(
                    "blocks {} and {} overlap",
                    word_string(u),
                    word_string(v)
                )));
            }
        }
    }
    blocks.iter().try_fold(sft.clone(), |s, b| delete_block(&s, b))
}

/// Parry measure of the cylinder `[w]`.
pub fn block_measure_maxentropy(sft: &Sft, w: &[u8]) -> Result<f64> {
    if w.is_empty() {
        return Ok(1.0);
    }
    let p = Presentation::new(sft, sft.natural_order().max(w.len()))?;
    let perron = p.perron()?;
    Ok(p.prefix_states(w).map(|s| perron.left[s] * perron.right[s]).sum())
}

#[derive(Debug, Clone, Serialize)]
pub struct ThetaBlock {
    pub theta: f64,
    pub q: Vec<f64>,
    /// Mass of the block cylinder not returned after `N` steps.
    pub unreturned: f64,
    pub block_measure: f64,
}

/// `θ = 1 − Σ_{k<N} q_k` for the cylinder `[w]` under the Parry measure, with
/// `q_k` the first-return probabilities at time `k + 1` of the Parry chain.
pub fn theta_block(sft: &Sft, w: &[u8], n: Option<usize>) -> Result<ThetaBlock> {
    let n = n.unwrap_or(4 * w.len()).max(1);
    let p = Presentation::new(sft, sft.natural_order().max(w.len()))?;
    let perron = p.perron()?;
    let states = p.states();
    let mut in_hole = vec![false; states];
    for s in p.prefix_states(w) {
        in_hole[s] = true;
    }
    let mut v: Vec<f64> = (0..states)
        .map(|s| if in_hole[s] { perron.left[s] * perron.right[s] } else { 0.0 })
        .collect();
    let mass: f64 = v.iter().sum();
    if !(mass > 0.0) {
        return Err(Error::ZeroMassHole);
    }
    v.iter_mut().for_each(|x| *x /= mass);
    let r = &perron.right;
    let mut q = Vec::with_capacity(n);
    let mut next = vec![0.0; states];
    for _ in 0..n {
        next.iter_mut().for_each(|x| *x = 0.0);
        for (s, succ) in p.succ.iter().enumerate() {
            if v[s] == 0.0 {
                continue;
            }
            let scale = v[s] / (perron.lambda * r[s]);
            for &t in succ {
                next[t] += scale * r[t];
            }
        }
        let mut hit = 0.0;
        for (x, &h) in next.iter_mut().zip(&in_hole) {
            if h {
                hit += *x;
                *x = 0.0;
            }
        }
        q.push(hit);
        std::mem::swap(&mut v, &mut next);
    }
    Ok(ThetaBlock {
        theta: 1.0 - q.iter().sum::<f64>(),
        unreturned: v.iter().sum(),
        q,
        block_measure: mass,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EntropyReport {
    pub block: String,
    pub length: usize,
    pub h_closed: f64,
    pub h_open: f64,
    pub drop: f64,
    /// `θ_block · μ₀(block)`.
    pub predicted_drop: f64,
    pub block_measure: f64,
    pub theta_block: f64,
    pub ratio: f64,
}

/// Exact entropy drop against its first-order prediction for each block.
pub fn entropy_drop_study(base: &Sft, blocks: &[Word]) -> Result<Vec<EntropyReport>> {
    let h_closed = topological_entropy(base)?;
    blocks
        .par_iter()
        .map(|b| {
            let h_open = topological_entropy(&delete_block(base, b)?)?;
            let tb = theta_block(base, b, None)?;
            let predicted = tb.theta * tb.block_measure;
            let drop = h_closed - h_open;
            Ok(EntropyReport {
                block: word_string(b),
                length: b.len(),
                h_closed,
                h_open,
                drop,
                predicted_drop: predicted,
                block_measure: tb.block_measure,
                theta_block: tb.theta,
                ratio: drop / predicted,
            })
        })
        .collect()
}

pub const ENTROPY_CSV_HEADER: &str = "block,L,h_closed,h_open,drop,prediction,ratio";

pub fn entropy_csv_line(r: &EntropyReport) -> String {
    format!(
        "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
        r.block, r.length, r.h_closed, r.h_open, r.drop, r.predicted_drop, r.ratio
    )
}

/// Digits for alphabets up to 10, else dot-separated indices.
pub fn word_string(w: &[u8]) -> String {
    if w.iter().all(|&s| s < 10) {
        w.iter().map(|s| char::from(b'0' + s)).collect()
    } else {
        w.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(".")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden() -> Sft {
        Sft::new(2, vec![vec![1, 1]]).unwrap()
    }

    #[test]
    fn entropies() {
        assert!((topological_entropy(&Sft::full(2).unwrap()).unwrap() - 2f64.ln()).abs() < 1e-14);
        let g = ((1.0 + 5f64.sqrt()) / 2.0).ln();
        assert!((topological_entropy(&golden()).unwrap() - g).abs() < 1e-12);
        assert_eq!(topological_entropy(&Sft::full(1).unwrap()).unwrap(), 0.0);
        let m = Sft::from_matrix(&[vec![1, 1], vec![1, 0]]).unwrap();
        assert!((topological_entropy(&m).unwrap() - g).abs() < 1e-12);
    }

    #[test]
    fn deletion() {
        let full = Sft::full(2).unwrap();
        let gm = delete_block(&full, &[1, 1]).unwrap();
        assert_eq!(gm, golden());
        assert_eq!(topological_entropy(&delete_block(&full, &[0]).unwrap()).unwrap(), 0.0);
        assert!(matches!(delete_block(&gm, &[1, 1]), Err(Error::BlockForbidden(_))));
        assert!(matches!(delete_block(&gm, &[0, 1, 1]), Err(Error::BlockForbidden(_))));
        assert!(delete_blocks(&full, &[vec![0, 1], vec![1, 0]]).is_err());
        assert!(delete_blocks(&full, &[vec![0, 0, 0], vec![1, 1, 1]]).is_ok());
    }

    #[test]
    fn periodic_and_reducible() {
        let alt = Sft::from_matrix(&[vec![0, 1], vec![1, 0]]).unwrap();
        assert!(matches!(topological_entropy(&alt), Err(Error::Periodic { period: 2 })));
        let red = Sft::new(2, vec![vec![0, 1]]).unwrap();
        assert!(matches!(topological_entropy(&red), Err(Error::Reducible { .. })));
    }

    #[test]
    fn parry_measures() {
        let full = Sft::full(2).unwrap();
        assert!((block_measure_maxentropy(&full, &[0, 0]).unwrap() - 0.25).abs() < 1e-14);
        assert!((block_measure_maxentropy(&full, &[1, 0, 1, 1, 0]).unwrap() - 1.0 / 32.0).abs() < 1e-14);
        // Golden mean: μ[0] = φ²/(1+φ²), μ[00] = μ[0]/φ.
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let m0 = phi * phi / (1.0 + phi * phi);
        assert!((block_measure_maxentropy(&golden(), &[0]).unwrap() - m0).abs() < 1e-13);
        assert!((block_measure_maxentropy(&golden(), &[0, 0]).unwrap() - m0 / phi).abs() < 1e-13);
    }

    #[test]
    fn theta_for_runs_and_symbols() {
        let full = Sft::full(2).unwrap();
        let t = theta_block(&full, &[0], Some(1)).unwrap();
        assert!((t.theta - 0.5).abs() < 1e-14);
        let t = theta_block(&full, &[1, 1, 1], None).unwrap();
        assert!((t.q[0] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn json_specs() {
        let s = parse_sft(r#"{"alphabet": 2, "forbidden_blocks": ["11"]}"#).unwrap();
        assert_eq!(s, golden());
        let s = parse_sft(r#"{"alphabet": 2, "forbidden_blocks": [[1, 1]]}"#).unwrap();
        assert_eq!(s, golden());
        assert!(parse_sft(r#"{"alphabet": 2, "forbidden_blocks": ["12"]}"#).is_err());
        assert!(parse_sft(r#"{"alphabet": 2, "matrix": [[1]]}"#).is_err());
        assert!(parse_sft(r#"{"alphabet": 2, "extra": 1}"#).is_err());
    }
}
