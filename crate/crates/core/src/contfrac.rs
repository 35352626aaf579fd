//! Convergents and limits of the continued fractions
//!
//! H  = 1 − a₀/(1 − c₁/(1 − a₁/(1 − c₂/…)))
//! H′ = c₀/(1 − a₋₁/(1 − c₋₁/(1 − a₋₂/…)))
//!
//! which bound the free parameter of the stochastic factorizations.

use serde::Serialize;

use crate::error::{Result, ZwalkError};
use crate::scalar::Scalar;
use crate::walk::WalkSpec;

pub const DEFAULT_TOL: f64 = 1e-13;
pub const DEFAULT_MAX_DEPTH: usize = 10_000;

/// Numerator/denominator pairs `(A_k, B_k)` of the upper fraction for
/// `k = 0..=depth`, stopping early when `a` or `c` runs out of data.
pub fn upper_terms<T: Scalar>(
    a: impl Fn(i64) -> Option<T>,
    c: impl Fn(i64) -> Option<T>,
    depth: usize,
) -> Vec<(T, T)> {
    let mut out = vec![(T::one(), T::one())];
    let (mut pa, mut pb) = (T::one(), T::zero());
    for k in 1..=depth {
        let n = (k / 2) as i64;
        let coef = if k % 2 == 0 { c(n) } else { a(n) };
        let Some(coef) = coef else { break };
        let (ca, cb) = out[k - 1].clone();
        let mut na = ca.clone() - coef.clone() * pa;
        let mut nb = cb.clone() - coef * pb;
        let (mut sa, mut sb) = (ca, cb);
        if let Some(f) = nb.renormalizer() {
            na = na * f.clone();
            nb = nb * f.clone();
            sa = sa * f.clone();
            sb = sb * f;
        }
        pa = sa;
        pb = sb;
        out.push((na, nb));
    }
    out
}

/// Pairs `(A′₋ₖ, B′₋ₖ)` of the lower fraction for `k = 0..=depth`.
pub fn lower_terms<T: Scalar>(
    a: impl Fn(i64) -> Option<T>,
    c: impl Fn(i64) -> Option<T>,
    depth: usize,
) -> Vec<(T, T)> {
    let mut out = vec![(T::zero(), T::one())];
    let (mut pa, mut pb) = (-T::one(), T::zero());
    for k in 1..=depth {
        let n = (k / 2) as i64;
        let coef = if k % 2 == 0 { a(-n) } else { c(-n) };
        let Some(coef) = coef else { break };
        let (ca, cb) = out[k - 1].clone();
        let mut na = ca.clone() - coef.clone() * pa;
        let mut nb = cb.clone() - coef * pb;
        let (mut sa, mut sb) = (ca, cb);
        if let Some(f) = nb.renormalizer() {
            na = na * f.clone();
            nb = nb * f.clone();
            sa = sa * f.clone();
            sb = sb * f;
        }
        pa = sa;
        pb = sb;
        out.push((na, nb));
    }
    out
}

fn check_terms<T: Scalar>(terms: &[(T, T)], primed: bool) -> Result<()> {
    for (k, (num, den)) in terms.iter().enumerate().skip(1) {
        if !(*num > T::zero()) || !(*den > *num) {
            let what = if primed { "0 < A' < B'" } else { "0 < A < B" };
            return Err(ZwalkError::HypothesisViolated {
                depth: k,
                what: format!("{what} fails: A = {:?}, B = {:?}", num.to_f64(), den.to_f64()),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergentPair {
    pub k: usize,
    pub a: f64,
    pub b: f64,
    pub a_prime: f64,
    pub b_prime: f64,
    /// `h_k = A_k / B_k`
    pub h: f64,
    /// `h′₋ₖ = A′₋ₖ / B′₋ₖ`
    pub h_prime: f64,
}

fn coeff_fns(spec: &WalkSpec) -> (impl Fn(i64) -> Option<f64> + '_, impl Fn(i64) -> Option<f64> + '_) {
    (move |n| spec.coeff(n).ok().map(|q| q.a), move |n| spec.coeff(n).ok().map(|q| q.c))
}

/// Convergents `h_k`, `h′₋ₖ` for `k = 0..=depth` from the four two-term recurrences.
pub fn convergents(spec: &WalkSpec, depth: usize) -> Result<Vec<ConvergentPair>> {
    let need = (depth / 2) as i64;
    spec.require(-need, need)?;
    let (a, c) = coeff_fns(spec);
    let up = upper_terms::<f64>(&a, &c, depth);
    let down = lower_terms::<f64>(&a, &c, depth);
    check_terms(&up, false)?;
    check_terms(&down, true)?;
    Ok(up
        .iter()
        .zip(&down)
        .enumerate()
        .map(|(k, (u, d))| ConvergentPair {
            k,
            a: u.0,
            b: u.1,
            a_prime: d.0,
            b_prime: d.1,
            h: u.0 / u.1,
            h_prime: d.0 / d.1,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FractionLimits {
    pub h: f64,
    pub h_prime: f64,
    /// Depth at which both fractions settled; 0 for closed forms.
    pub converged_after: usize,
    /// Last step size of the iteration; 0 for closed forms.
    pub tolerance: f64,
    /// True when a finite table ran out before convergence, so `h` and `h_prime`
    /// are the deepest convergents rather than limits.
    pub bracketed: bool,
}

fn sqrt_disc(a: f64, c: f64) -> Result<f64> {
    let d = (1.0 + c - a).powi(2) - 4.0 * c;
    if d < -1e-12 {
        return Err(ZwalkError::PreconditionViolated(format!(
            "continued fractions diverge: a = {a} > (1 - sqrt(c))^2 = {}",
            (1.0 - c.sqrt()).powi(2)
        )));
    }
    Ok(d.max(0.0).sqrt())
}

/// Closed form `H` for constant coefficients `a`, `c` on the nonnegative side.
pub fn closed_h(a: f64, c: f64) -> Result<f64> {
    Ok(0.5 * (1.0 + c - a + sqrt_disc(a, c)?))
}

/// Closed form `H′` of the constant walk, `c / H`.
pub fn closed_h_prime_constant(a: f64, c: f64) -> Result<f64> {
    Ok(0.5 * (1.0 + c - a - sqrt_disc(a, c)?))
}

/// Closed form `H′` of the force walk.
pub fn closed_h_prime_force(a: f64, c: f64) -> Result<f64> {
    Ok(c / (2.0 * a) * (1.0 + a - c - sqrt_disc(a, c)?))
}

/// Limits of both fractions: closed forms for the named families, iterated
/// convergents for tables.
pub fn limits(spec: &WalkSpec, tol: f64, max_depth: usize) -> Result<FractionLimits> {
    let lim = match *spec {
        WalkSpec::Constant { a, c, .. } => FractionLimits {
            h: closed_h(a, c)?,
            h_prime: closed_h_prime_constant(a, c)?,
            converged_after: 0,
            tolerance: 0.0,
            bracketed: false,
        },
        WalkSpec::Force { a, c } => FractionLimits {
            h: closed_h(a, c)?,
            h_prime: closed_h_prime_force(a, c)?,
            converged_after: 0,
            tolerance: 0.0,
            bracketed: false,
        },
        WalkSpec::Table { window, .. } => iterate_limits(spec, window, tol, max_depth)?,
    };
    if lim.h_prime > lim.h + 1e-15 {
        return Err(ZwalkError::NoStochasticRange { h: lim.h, h_prime: lim.h_prime });
    }
    Ok(lim)
}

fn iterate_limits(spec: &WalkSpec, window: [i64; 2], tol: f64, max_depth: usize) -> Result<FractionLimits> {
    if window[0] > -1 || window[1] < 0 {
        return Err(ZwalkError::WindowTooSmall { need_lo: -1, need_hi: 0, lo: window[0], hi: window[1] });
    }
    let (a, c) = coeff_fns(spec);
    let up = upper_terms::<f64>(&a, &c, max_depth);
    let down = lower_terms::<f64>(&a, &c, max_depth);
    check_terms(&up, false)?;
    check_terms(&down, true)?;
    let h = |k: usize| up[k].0 / up[k].1;
    let hp = |k: usize| down[k].0 / down[k].1;
    let avail = up.len().min(down.len()) - 1;
    for k in 2..=avail {
        let step = (h(k) - h(k - 1)).abs().max((hp(k) - hp(k - 1)).abs());
        if step < tol {
            return Ok(FractionLimits { h: h(k), h_prime: hp(k), converged_after: k, tolerance: step, bracketed: false });
        }
    }
    let exhausted = up.len() - 1 < max_depth || down.len() - 1 < max_depth;
    if !exhausted {
        return Err(ZwalkError::NonConvergent { depth: max_depth });
    }
    let (ku, kd) = (up.len() - 1, down.len() - 1);
    let step = (h(ku) - h(ku - 1)).abs().max((hp(kd) - hp(kd - 1)).abs());
    Ok(FractionLimits { h: h(ku), h_prime: hp(kd), converged_after: ku.max(kd), tolerance: step, bracketed: true })
}
