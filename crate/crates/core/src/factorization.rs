//! Stochastic UL and LU factorizations over a finite window.
//!
//! Both orders are driven by one sequence `gₙ` with `g₀` the free parameter:
//!
//! ```text
//! gₙ₊₁ = cₙ₊₁ / (1 − aₙ/(1 − gₙ))        gₙ₋₁ = 1 − aₙ₋₁ / (1 − cₙ/gₙ)
//! UL:  yₙ = gₙ,  xₙ = 1 − gₙ,  rₙ = cₙ/gₙ,  sₙ = 1 − rₙ
//! LU:  r̃ₙ = gₙ,  s̃ₙ = 1 − gₙ,  x̃ₙ = aₙ/(1 − gₙ),  ỹₙ = 1 − x̃ₙ
//! ```
//!
//! At `g₀ = H` the forward map is repelling, so the nonnegative side is read
//! off the tail fractions instead; symmetrically at `g₀ = H′` for the negative
//! side.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::contfrac::{self, FractionLimits};
use crate::error::{Result, ZwalkError};
use crate::scalar::Scalar;
use crate::walk::{TruncatedMatrix, WalkSpec};

/// Parameters this close to `H` or `H′` are treated as the boundary value.
pub const BOUNDARY_SNAP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Order {
    Ul,
    Lu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Anchor {
    Interior,
    /// Parameter at `H`.
    Upper,
    /// Parameter at `H′`.
    Lower,
    /// `H = H′`.
    Both,
}

/// One step of the forward map, `gₙ ↦ gₙ₊₁`.
pub fn forward_step<T: Scalar>(g: T, a_n: T, c_next: T) -> T {
    c_next / (T::one() - a_n / (T::one() - g))
}

/// One step of the backward map, `gₙ ↦ gₙ₋₁`.
pub fn backward_step<T: Scalar>(g: T, a_prev: T, c_n: T) -> T {
    T::one() - a_prev / (T::one() - c_n / g)
}

/// Plain two-sided recursion from `g₀ = p` over `lo..=hi` (requires `lo <= 0 <= hi`).
pub fn g_plain<T: Scalar>(
    a: impl Fn(i64) -> T,
    c: impl Fn(i64) -> T,
    p: T,
    lo: i64,
    hi: i64,
) -> Vec<T> {
    let mut g = vec![T::zero(); (hi - lo + 1) as usize];
    let at = |n: i64| (n - lo) as usize;
    g[at(0)] = p;
    for n in 0..hi {
        g[at(n + 1)] = forward_step(g[at(n)].clone(), a(n), c(n + 1));
    }
    for n in (lo + 1..=0).rev() {
        g[at(n - 1)] = backward_step(g[at(n)].clone(), a(n - 1), c(n));
    }
    g
}

fn a_of(spec: &WalkSpec, n: i64) -> f64 {
    spec.coeff(n).map(|q| q.a).unwrap_or(f64::NAN)
}

fn c_of(spec: &WalkSpec, n: i64) -> f64 {
    spec.coeff(n).map(|q| q.c).unwrap_or(f64::NAN)
}

/// Values of the `H`-tail fractions at `1..=hi`.
fn upper_tail(spec: &WalkSpec, lim: &FractionLimits, hi: i64) -> Vec<f64> {
    match spec {
        WalkSpec::Constant { .. } | WalkSpec::Force { .. } => vec![lim.h; hi.max(0) as usize],
        WalkSpec::Table { window, .. } => {
            let top = window[1];
            let mut g = vec![0.0; (top + 1).max(1) as usize];
            g[top as usize] = 1.0 - a_of(spec, top);
            for n in (1..top).rev() {
                g[n as usize] = backward_step(g[n as usize + 1], a_of(spec, n), c_of(spec, n + 1));
            }
            g[1..=hi as usize].to_vec()
        }
    }
}

/// Values of the `H′`-tail fractions at `lo..=-1`.
fn lower_tail(spec: &WalkSpec, lim: &FractionLimits, lo: i64) -> Result<Vec<f64>> {
    let len = (-lo).max(0) as usize;
    Ok(match *spec {
        WalkSpec::Constant { .. } => vec![lim.h_prime; len],
        // the negative half is the constant walk with a and c exchanged
        WalkSpec::Force { a, c } => vec![a / contfrac::closed_h(c, a)?; len],
        WalkSpec::Table { window, .. } => {
            let bottom = window[0];
            let mut g = vec![0.0; (-bottom) as usize];
            let at = |n: i64| (n - bottom) as usize;
            g[0] = c_of(spec, bottom);
            for n in bottom..-1 {
                g[at(n + 1)] = forward_step(g[at(n)], a_of(spec, n), c_of(spec, n + 1));
            }
            g[at(lo)..].to_vec()
        }
    })
}

/// The shared sequence `g` on `[-n, n]` and the anchoring used.
pub fn g_sequence(spec: &WalkSpec, p: f64, n: i64, lim: &FractionLimits) -> Result<(Vec<f64>, Anchor)> {
    if !p.is_finite() || p < lim.h_prime - BOUNDARY_SNAP || p > lim.h + BOUNDARY_SNAP {
        return Err(ZwalkError::OutOfRange { param: p, lo: lim.h_prime, hi: lim.h });
    }
    let upper = (p - lim.h).abs() <= BOUNDARY_SNAP;
    let lower = (p - lim.h_prime).abs() <= BOUNDARY_SNAP;
    let anchor = match (upper, lower) {
        (true, true) => Anchor::Both,
        (true, false) => Anchor::Upper,
        (false, true) => Anchor::Lower,
        _ => Anchor::Interior,
    };
    let g0 = if upper {
        lim.h
    } else if lower {
        lim.h_prime
    } else {
        p
    };
    let mut g = vec![0.0; (2 * n + 1) as usize];
    let at = |k: i64| (k + n) as usize;
    g[at(0)] = g0;
    if upper {
        for (k, v) in upper_tail(spec, lim, n).into_iter().enumerate() {
            g[at(k as i64 + 1)] = v;
        }
    } else {
        for k in 0..n {
            g[at(k + 1)] = forward_step(g[at(k)], a_of(spec, k), c_of(spec, k + 1));
        }
    }
    if lower {
        for (k, v) in lower_tail(spec, lim, -n)?.into_iter().enumerate() {
            g[k] = v;
        }
    } else {
        for k in (-n + 1..=0).rev() {
            g[at(k - 1)] = backward_step(g[at(k)], a_of(spec, k - 1), c_of(spec, k));
        }
    }
    Ok((g, anchor))
}

fn check_unit(index: i64, name: &'static str, value: f64, anchored: bool) -> Result<bool> {
    let strict = value > 0.0 && value < 1.0;
    if strict {
        return Ok(false);
    }
    let near = value > -BOUNDARY_SNAP && value < 1.0 + BOUNDARY_SNAP;
    if anchored && near {
        return Ok(true);
    }
    Err(ZwalkError::NonPositiveCoefficient { index, name, value })
}

/// `P = P_U P_L` with `P_U` pure-birth (`yₙ` stay, `xₙ` up) and `P_L` pure-death
/// (`sₙ` stay, `rₙ` down).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ULFactors {
    pub lo: i64,
    pub hi: i64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub s: Vec<f64>,
    pub r: Vec<f64>,
    pub param: f64,
    pub anchor: Anchor,
    /// Accepted against finite-table brackets only.
    pub conditional: bool,
    /// Some factor came within tolerance of 0 or 1.
    pub flagged: bool,
    /// Largest deviation of the recomputed walk coefficients.
    pub residual: f64,
}

/// `P = P̃_L P̃_U` with `P̃_L` (`s̃ₙ` stay, `r̃ₙ` down) and `P̃_U` (`ỹₙ` stay, `x̃ₙ` up).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LUFactors {
    pub lo: i64,
    pub hi: i64,
    pub r: Vec<f64>,
    pub s: Vec<f64>,
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    pub param: f64,
    pub anchor: Anchor,
    pub conditional: bool,
    pub flagged: bool,
    pub residual: f64,
}

macro_rules! accessors {
    ($t:ty) => {
        impl $t {
            fn idx(&self, n: i64) -> usize {
                assert!(self.lo <= n && n <= self.hi, "index {n} outside factor window [{}, {}]", self.lo, self.hi);
                (n - self.lo) as usize
            }
            pub fn x(&self, n: i64) -> f64 {
                self.x[self.idx(n)]
            }
            pub fn y(&self, n: i64) -> f64 {
                self.y[self.idx(n)]
            }
            pub fn s(&self, n: i64) -> f64 {
                self.s[self.idx(n)]
            }
            pub fn r(&self, n: i64) -> f64 {
                self.r[self.idx(n)]
            }
            pub fn contains(&self, n: i64) -> bool {
                self.lo <= n && n <= self.hi
            }
        }
    };
}
accessors!(ULFactors);
accessors!(LUFactors);

fn residual_ul(spec: &WalkSpec, f: &ULFactors) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for n in f.lo..f.hi {
        let q = spec.coeff(n)?;
        let a = f.x(n) * f.s(n + 1);
        let b = f.x(n) * f.r(n + 1) + f.y(n) * f.s(n);
        let c = f.y(n) * f.r(n);
        worst = worst.max((a - q.a).abs()).max((b - q.b).abs()).max((c - q.c).abs());
    }
    Ok(worst)
}

fn residual_lu(spec: &WalkSpec, f: &LUFactors) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for n in f.lo + 1..=f.hi {
        let q = spec.coeff(n)?;
        let a = f.s(n) * f.x(n);
        let b = f.r(n) * f.x(n - 1) + f.s(n) * f.y(n);
        let c = f.r(n) * f.y(n - 1);
        worst = worst.max((a - q.a).abs()).max((b - q.b).abs()).max((c - q.c).abs());
    }
    Ok(worst)
}

fn prepare(spec: &WalkSpec, p: f64, n: i64) -> Result<(Vec<f64>, Anchor, FractionLimits)> {
    if n < 1 {
        return Err(ZwalkError::InvalidSpec(format!("factor window must be >= 1, got {n}")));
    }
    spec.require(-n, n)?;
    let lim = contfrac::limits(spec, contfrac::DEFAULT_TOL, contfrac::DEFAULT_MAX_DEPTH)?;
    let (g, anchor) = g_sequence(spec, p, n, &lim)?;
    Ok((g, anchor, lim))
}

/// UL factorization on `[-n, n]` with free parameter `y₀ ∈ [H′, H]`.
pub fn factor_ul(spec: &WalkSpec, y0: f64, n: i64) -> Result<ULFactors> {
    let (g, anchor, _) = prepare(spec, y0, n)?;
    let anchored = anchor != Anchor::Interior;
    let len = g.len();
    let (mut x, mut y, mut s, mut r) = (vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]);
    let mut flagged = false;
    for (i, k) in (-n..=n).enumerate() {
        let gk = g[i];
        y[i] = gk;
        x[i] = 1.0 - gk;
        r[i] = c_of(spec, k) / gk;
        s[i] = 1.0 - r[i];
        for (name, v) in [("y", y[i]), ("x", x[i]), ("r", r[i]), ("s", s[i])] {
            flagged |= check_unit(k, name, v, anchored)?;
        }
    }
    let mut f = ULFactors {
        lo: -n,
        hi: n,
        x,
        y,
        s,
        r,
        param: y0,
        anchor,
        conditional: spec.window().is_some(),
        flagged,
        residual: 0.0,
    };
    f.residual = residual_ul(spec, &f)?;
    Ok(f)
}

/// LU factorization on `[-n, n]` with free parameter `r̃₀ ∈ [H′, H]`.
pub fn factor_lu(spec: &WalkSpec, r0: f64, n: i64) -> Result<LUFactors> {
    let (g, anchor, _) = prepare(spec, r0, n)?;
    let anchored = anchor != Anchor::Interior;
    let len = g.len();
    let (mut r, mut s, mut y, mut x) = (vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]);
    let mut flagged = false;
    for (i, k) in (-n..=n).enumerate() {
        let gk = g[i];
        r[i] = gk;
        s[i] = 1.0 - gk;
        x[i] = a_of(spec, k) / (1.0 - gk);
        y[i] = 1.0 - x[i];
        for (name, v) in [("r~", r[i]), ("s~", s[i]), ("x~", x[i]), ("y~", y[i])] {
            flagged |= check_unit(k, name, v, anchored)?;
        }
    }
    let mut f = LUFactors {
        lo: -n,
        hi: n,
        r,
        s,
        y,
        x,
        param: r0,
        anchor,
        conditional: spec.window().is_some(),
        flagged,
        residual: 0.0,
    };
    f.residual = residual_lu(spec, &f)?;
    Ok(f)
}

/// Either factorization, tagged by order.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "order", rename_all = "lowercase")]
pub enum Factors {
    Ul(ULFactors),
    Lu(LUFactors),
}

impl Factors {
    pub fn order(&self) -> Order {
        match self {
            Factors::Ul(_) => Order::Ul,
            Factors::Lu(_) => Order::Lu,
        }
    }
    pub fn param(&self) -> f64 {
        match self {
            Factors::Ul(f) => f.param,
            Factors::Lu(f) => f.param,
        }
    }
    pub fn window(&self) -> (i64, i64) {
        match self {
            Factors::Ul(f) => (f.lo, f.hi),
            Factors::Lu(f) => (f.lo, f.hi),
        }
    }
}

pub fn factorize(spec: &WalkSpec, order: Order, param: f64, n: i64) -> Result<Factors> {
    Ok(match order {
        Order::Ul => Factors::Ul(factor_ul(spec, param, n)?),
        Order::Lu => Factors::Lu(factor_lu(spec, param, n)?),
    })
}

/// Dense product of the two bidiagonal factors, restricted to `[-n, n]`.
pub fn assemble_product(factors: &Factors, n: i64) -> Result<TruncatedMatrix> {
    let (lo, hi) = factors.window();
    if lo > -n - 1 || hi < n + 1 {
        return Err(ZwalkError::WindowTooSmall { need_lo: -n - 1, need_hi: n + 1, lo, hi });
    }
    let base = -n - 1;
    let size = (2 * n + 3) as usize;
    let at = |k: i64| (k - base) as usize;
    let mut left = DMatrix::<f64>::zeros(size, size);
    let mut right = DMatrix::<f64>::zeros(size, size);
    for k in base..=n + 1 {
        let i = at(k);
        match factors {
            Factors::Ul(f) => {
                left[(i, i)] = f.y(k);
                if i + 1 < size {
                    left[(i, i + 1)] = f.x(k);
                }
                right[(i, i)] = f.s(k);
                if i > 0 {
                    right[(i, i - 1)] = f.r(k);
                }
            }
            Factors::Lu(f) => {
                left[(i, i)] = f.s(k);
                if i > 0 {
                    left[(i, i - 1)] = f.r(k);
                }
                right[(i, i)] = f.y(k);
                if i + 1 < size {
                    right[(i, i + 1)] = f.x(k);
                }
            }
        }
    }
    let full = left * right;
    let inner = full.view((1, 1), (size - 2, size - 2)).into_owned();
    Ok(TruncatedMatrix { lo: -n, hi: n, matrix: inner })
}
