//! Karlin–McGregor representation of n-step probabilities, checked against
//! exact powers of a truncated transition matrix and Monte Carlo paths.

use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, ZwalkError};
use crate::polynomials::{PolynomialFamily, PotentialCoefficients, RowJet};
use crate::spectral::{self, Atom, AtomOrder, Mat2, MatrixMeasure};
use crate::walk::WalkSpec;

/// Tolerance for spectra of constant walks and their transforms.
pub const CONSTANT_TOL: f64 = 1e-8;
/// Tolerance once atoms and nearby poles are involved.
pub const FORCE_TOL: f64 = 1e-7;

/// A family sampled at the quadrature nodes and atoms of a measure.
struct Sampled<'a> {
    xs: Vec<f64>,
    ws: Vec<Mat2>,
    /// `values[node][row]`
    values: Vec<Vec<[f64; 2]>>,
    atoms: Vec<(&'a Atom, Vec<RowJet>)>,
    lo: i64,
}

impl<'a> Sampled<'a> {
    fn new(measure: &'a MatrixMeasure, family: &PolynomialFamily<f64>, nodes: usize) -> Self {
        let pts = measure.ac.nodes(nodes);
        let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let ws = pts.iter().map(|p| p.1).collect();
        let values = xs.par_iter().map(|&x| family.jets(x).into_iter().map(|j| j.0).collect()).collect();
        let atoms = measure.atoms.iter().map(|a| (a, family.jets(a.at))).collect();
        Sampled { xs, ws, values, atoms, lo: family.lo }
    }

    fn idx(&self, n: i64) -> usize {
        (n - self.lo) as usize
    }

    /// `∫ xᵏ·Pᵢ dΨ Pⱼᵀ`
    fn pair(&self, i: i64, j: i64, k: u32) -> f64 {
        let (ii, jj) = (self.idx(i), self.idx(j));
        let mut total = 0.0;
        for (node, &x) in self.xs.iter().enumerate() {
            let (l, r, w) = (self.values[node][ii], self.values[node][jj], &self.ws[node]);
            let q = l[0] * (w[(0, 0)] * r[0] + w[(0, 1)] * r[1]) + l[1] * (w[(1, 0)] * r[0] + w[(1, 1)] * r[1]);
            total += x.powi(k as i32) * q;
        }
        for (atom, jets) in &self.atoms {
            total += atom.pair(weighted(jets[ii], atom.at, k), jets[jj]);
        }
        total
    }

    /// `∫ Pₙ dΨ xᵏ e_α` for both `α`.
    fn against_monomial(&self, n: i64, k: u32) -> [f64; 2] {
        let ii = self.idx(n);
        let mut out = [0.0; 2];
        for (alpha, slot) in out.iter_mut().enumerate() {
            let mut total = 0.0;
            for (node, &x) in self.xs.iter().enumerate() {
                let (l, w) = (self.values[node][ii], &self.ws[node]);
                total += x.powi(k as i32) * (l[0] * w[(0, alpha)] + l[1] * w[(1, alpha)]);
            }
            for (atom, jets) in &self.atoms {
                let mut unit = [0.0; 2];
                unit[alpha] = 1.0;
                total += atom.pair(jets[ii], weighted((unit, [0.0; 2]), atom.at, k));
            }
            *slot = total;
        }
        out
    }
}

/// Value and derivative of `xᵏ·P(x)` from those of `P`.
fn weighted(jet: RowJet, x: f64, k: u32) -> RowJet {
    let xk = x.powi(k as i32);
    let dxk = if k == 0 { 0.0 } else { k as f64 * x.powi(k as i32 - 1) };
    let (v, d) = jet;
    ([xk * v[0], xk * v[1]], [dxk * v[0] + xk * d[0], dxk * v[1] + xk * d[1]])
}

fn check_rows(q: &PolynomialFamily<f64>, pot: &PotentialCoefficients, rows: &[i64]) -> Result<()> {
    for &r in rows {
        if !q.contains(r) {
            return Err(ZwalkError::WindowTooSmall { need_lo: r.min(0), need_hi: r.max(0), lo: q.lo, hi: q.hi });
        }
        if r < pot.lo || r > pot.hi {
            return Err(ZwalkError::WindowTooSmall { need_lo: r.min(0), need_hi: r.max(0), lo: pot.lo, hi: pot.hi });
        }
    }
    Ok(())
}

/// `P⁽ⁿ⁾ᵢⱼ = πⱼ ∫ xⁿ Qᵢ dΨ Qⱼᵀ`.
pub fn km_probability(
    measure: &MatrixMeasure,
    q: &PolynomialFamily<f64>,
    pot: &PotentialCoefficients,
    i: i64,
    j: i64,
    n: u32,
    nodes: usize,
) -> Result<f64> {
    check_rows(q, pot, &[i, j])?;
    let left = |x: f64| weighted(q.jet(i, x), x, n);
    let right = |x: f64| q.jet(j, x);
    Ok(pot.pi(j) * spectral::pair_jets(measure, left, right, nodes))
}

/// Entry `(i, j)` of the `n`-th power of the section on `[-N, N]`,
/// `N = max(|i|, |j|) + n`, which no path of length `n` from `i` can leave.
pub fn oracle_power(spec: &WalkSpec, i: i64, j: i64, n: u32) -> Result<f64> {
    let big = i.abs().max(j.abs()) + n as i64;
    oracle_power_window(spec, i, j, n, big.max(1))
}

/// Same as [`oracle_power`] on an explicit section `[-big, big]`.
pub fn oracle_power_window(spec: &WalkSpec, i: i64, j: i64, n: u32, big: i64) -> Result<f64> {
    spec.require(-big, big)?;
    let t = spec.truncate(big)?;
    let mut v = DVector::zeros(t.size());
    v[(i + big) as usize] = 1.0;
    let pt = t.matrix.transpose();
    for _ in 0..n {
        v = &pt * v;
    }
    Ok(v[(j + big) as usize])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KmEntry {
    pub i: i64,
    pub j: i64,
    pub n: u32,
    pub km: f64,
    pub oracle: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub entries: Vec<KmEntry>,
    pub max_error: f64,
    pub nodes: usize,
    pub window: (i64, i64),
    pub tol: f64,
    pub pass: bool,
}

/// Karlin–McGregor values against the oracle for `|i|, |j| ≤ max_index`, `n ≤ max_steps`.
#[allow(clippy::too_many_arguments)]
pub fn verify(
    measure: &MatrixMeasure,
    q: &PolynomialFamily<f64>,
    pot: &PotentialCoefficients,
    spec: &WalkSpec,
    max_index: i64,
    max_steps: u32,
    tol: f64,
    nodes: usize,
) -> Result<VerificationReport> {
    check_rows(q, pot, &[-max_index, max_index])?;
    spec.require(-max_index - max_steps as i64, max_index + max_steps as i64)?;
    let sampled = Sampled::new(measure, q, nodes);
    let pairs: Vec<(i64, i64)> =
        (-max_index..=max_index).flat_map(|i| (-max_index..=max_index).map(move |j| (i, j))).collect();
    let blocks: Vec<Result<Vec<KmEntry>>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            (0..=max_steps)
                .map(|n| {
                    let km = pot.pi(j) * sampled.pair(i, j, n);
                    let oracle = oracle_power(spec, i, j, n)?;
                    Ok(KmEntry { i, j, n, km, oracle, abs_error: (km - oracle).abs() })
                })
                .collect()
        })
        .collect();
    let mut entries = Vec::with_capacity(pairs.len() * (max_steps as usize + 1));
    for b in blocks {
        entries.extend(b?);
    }
    let max_error = entries.iter().map(|e| e.abs_error).fold(0.0, f64::max);
    Ok(VerificationReport {
        entries,
        max_error,
        nodes,
        window: (-max_index, max_index),
        tol,
        pass: max_error <= tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GramEntry {
    pub i: i64,
    pub j: i64,
    pub value: f64,
    pub expected: f64,
    /// `√(πᵢπⱼ)·|value − expected|`
    pub normalized_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonomialEntry {
    pub n: i64,
    pub power: u32,
    pub value: [f64; 2],
    pub expected: [f64; 2],
    /// Error divided by the Cauchy–Schwarz bound `‖Pₙ‖·‖xᵏ e_α‖`.
    pub normalized_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrthogonalityReport {
    pub gram: Vec<GramEntry>,
    pub monomials: Vec<MonomialEntry>,
    pub max_error: f64,
    pub nodes: usize,
    pub tol: f64,
    pub pass: bool,
}

/// Orthogonality `⟨Qᵢ, Qⱼ⟩ = δᵢⱼ/πⱼ` for `|i|, |j| ≤ max_index`, and the
/// monomial conditions for rows `n` and `−n−1`, `0 ≤ n ≤ max_index`.
pub fn orthogonality_suite(
    measure: &MatrixMeasure,
    q: &PolynomialFamily<f64>,
    pot: &PotentialCoefficients,
    max_index: i64,
    tol: f64,
    nodes: usize,
) -> Result<OrthogonalityReport> {
    check_rows(q, pot, &[-max_index - 1, max_index])?;
    if pot.alpha.len() <= max_index as usize || pot.beta.len() <= max_index as usize {
        return Err(ZwalkError::WindowTooSmall { need_lo: -max_index - 1, need_hi: max_index, lo: pot.lo, hi: pot.hi });
    }
    let sampled = Sampled::new(measure, q, nodes);
    let mut gram = Vec::new();
    for i in -max_index..=max_index {
        for j in -max_index..=max_index {
            let value = sampled.pair(i, j, 0);
            let expected = if i == j { 1.0 / pot.pi(j) } else { 0.0 };
            let normalized_error = (pot.pi(i) * pot.pi(j)).sqrt() * (value - expected).abs();
            gram.push(GramEntry { i, j, value, expected, normalized_error });
        }
    }
    let mut monomials = Vec::new();
    for n in 0..=max_index {
        for (row, expected_at_n) in [(n, [pot.alpha[n as usize], 0.0]), (-n - 1, [0.0, pot.beta[n as usize]])] {
            let norm = sampled.pair(row, row, 0).max(0.0).sqrt();
            for power in 0..=n as u32 {
                let even = spectral::moment(measure, 2 * power as i32, nodes)?.value;
                let value = sampled.against_monomial(row, power);
                let expected = if power == n as u32 { expected_at_n } else { [0.0; 2] };
                let mut err: f64 = 0.0;
                for alpha in 0..2 {
                    let bound = norm * even[(alpha, alpha)].max(0.0).sqrt();
                    let e = (value[alpha] - expected[alpha]).abs();
                    err = err.max(if bound > 0.0 { e / bound } else { e });
                }
                monomials.push(MonomialEntry { n: row, power, value, expected, normalized_error: err });
            }
        }
    }
    let max_error = gram
        .iter()
        .map(|g| g.normalized_error)
        .chain(monomials.iter().map(|m| m.normalized_error))
        .fold(0.0, f64::max);
    Ok(OrthogonalityReport { gram, monomials, max_error, nodes, tol, pass: max_error <= tol })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimulatedState {
    pub j: i64,
    pub count: u64,
    pub estimate: f64,
    /// Binomial standard error `√(p(1−p)/paths)`.
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub start: i64,
    pub steps: u32,
    pub paths: u64,
    pub seed: u64,
    pub states: Vec<SimulatedState>,
}

impl SimulationReport {
    pub fn estimate(&self, j: i64) -> (f64, f64) {
        self.states
            .iter()
            .find(|s| s.j == j)
            .map(|s| (s.estimate, s.std_error))
            .unwrap_or((0.0, 0.0))
    }
}

/// Empirical law of `X_n` given `X_0 = i`; path `k` draws from stream `k` of the
/// generator seeded by `seed`, so results do not depend on the thread count.
pub fn simulate(spec: &WalkSpec, i: i64, n: u32, paths: u64, seed: u64) -> Result<SimulationReport> {
    spec.require(i - n as i64, i + n as i64)?;
    let span = n as i64;
    let coeffs: Vec<(f64, f64)> = (i - span..=i + span)
        .map(|k| spec.coeff(k).map(|q| (q.a, q.a + q.b)))
        .collect::<Result<_>>()?;
    let width = (2 * span + 1) as usize;
    let counts = (0..paths)
        .into_par_iter()
        .fold(
            || vec![0u64; width],
            |mut acc, path| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(path);
                let mut pos = span;
                for _ in 0..n {
                    let (up, stay) = coeffs[pos as usize];
                    let u: f64 = rng.random();
                    if u < up {
                        pos += 1;
                    } else if u >= stay {
                        pos -= 1;
                    }
                }
                acc[pos as usize] += 1;
                acc
            },
        )
        .reduce(
            || vec![0u64; width],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    let mut by_state = BTreeMap::new();
    for (k, c) in counts.into_iter().enumerate() {
        if c > 0 {
            by_state.insert(i - span + k as i64, c);
        }
    }
    let states = by_state
        .into_iter()
        .map(|(j, count)| {
            let p = count as f64 / paths as f64;
            SimulatedState { j, count, estimate: p, std_error: (p * (1.0 - p) / paths as f64).sqrt() }
        })
        .collect();
    Ok(SimulationReport { start: i, steps: n, paths, seed, states })
}

/// Atom masses `F(t)MF(t)ᵀ` of point atoms, for PSD checks.
pub fn point_masses(measure: &MatrixMeasure) -> Vec<(f64, Mat2)> {
    measure
        .atoms
        .iter()
        .filter(|a| a.order == AtomOrder::Point)
        .map(|a| (a.at, a.effective_mass()))
        .collect()
}
