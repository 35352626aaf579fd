//! Polynomial families Q, S, T and their Darboux counterparts Q̃, Q̂ as
//! monomial coefficient tables, plus the potential coefficients.
//!
//! Tables are kept in the monomial basis, but evaluating a high-degree row
//! from monomial coefficients is badly conditioned, so `f64` families also
//! carry the recurrence data and are evaluated through it.

use serde::Serialize;

use crate::darboux;
use crate::error::{Result, ZwalkError};
use crate::factorization::{Factors, LUFactors, ULFactors};
use crate::scalar::Scalar;
use crate::walk::WalkSpec;

/// Relative tolerance for the coefficientwise identity checks.
pub const IDENTITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Poly<T> {
    /// Ascending coefficients; no trailing negligible entries.
    pub coeffs: Vec<T>,
}

impl<T: Scalar> Poly<T> {
    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    pub fn constant(c: T) -> Self {
        Poly::new(vec![c])
    }

    /// `x`
    pub fn x() -> Self {
        Poly::new(vec![T::zero(), T::one()])
    }

    pub fn new(coeffs: Vec<T>) -> Self {
        let mut p = Poly { coeffs };
        p.trim();
        p
    }

    pub fn max_abs(&self) -> T {
        let mut m = T::zero();
        for c in &self.coeffs {
            let a = c.magnitude();
            if a > m {
                m = a;
            }
        }
        m
    }

    fn trim(&mut self) {
        let scale = self.max_abs();
        while let Some(last) = self.coeffs.last() {
            if last.is_zero() || last.negligible(&scale) {
                self.coeffs.pop();
            } else {
                break;
            }
        }
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> Option<&T> {
        self.coeffs.last()
    }

    pub fn coeff(&self, k: usize) -> T {
        self.coeffs.get(k).cloned().unwrap_or_else(T::zero)
    }

    pub fn scale(&self, k: &T) -> Self {
        Poly::new(self.coeffs.iter().map(|c| c.clone() * k.clone()).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) + other.coeff(k)).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) - other.coeff(k)).collect())
    }

    pub fn mul_x(&self) -> Self {
        if self.coeffs.is_empty() {
            return Poly::zero();
        }
        let mut v = Vec::with_capacity(self.coeffs.len() + 1);
        v.push(T::zero());
        v.extend(self.coeffs.iter().cloned());
        Poly { coeffs: v }
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            return Poly::zero();
        }
        let mut v = vec![T::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                v[i + j] = v[i + j].clone() + a.clone() * b.clone();
            }
        }
        Poly::new(v)
    }

    pub fn eval(&self, x: &T) -> T {
        let mut acc = T::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x.clone() + c.clone();
        }
        acc
    }

    /// Exact division by `x`; the error carries the size of the dropped constant term.
    pub fn div_x(&self) -> std::result::Result<Self, T> {
        if self.coeffs.is_empty() {
            return Ok(Poly::zero());
        }
        let c0 = self.coeffs[0].clone();
        if !c0.is_zero() && !c0.negligible(&self.max_abs()) {
            return Err(c0.magnitude());
        }
        Ok(Poly::new(self.coeffs[1..].to_vec()))
    }

    /// Largest coefficient gap, relative to the largest coefficient of either side.
    pub fn rel_distance(&self, other: &Self) -> f64 {
        let n = self.coeffs.len().max(other.coeffs.len());
        let scale = self.max_abs().to_f64().max(other.max_abs().to_f64());
        if scale == 0.0 {
            return 0.0;
        }
        (0..n).map(|k| (self.coeff(k) - other.coeff(k)).to_f64().abs()).fold(0.0, f64::max) / scale
    }
}

impl Poly<f64> {
    /// Value and derivative by Horner's rule.
    pub fn eval_with_derivative(&self, x: f64) -> (f64, f64) {
        let (mut p, mut d) = (0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            d = d * x + p;
            p = p * x + c;
        }
        (p, d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FamilyTag {
    Q,
    S,
    T,
    QTilde,
    QHat,
}

/// How an `f64` family is evaluated away from its coefficient table.
#[derive(Debug, Clone, PartialEq)]
pub enum RowRule {
    /// Rows are the three-term solutions of `base`.
    Direct,
    /// `Sₙ = sₙQₙ + rₙQₙ₋₁`
    S(ULFactors),
    /// `Tₙ = ỹₙQₙ + x̃ₙQₙ₊₁`
    T(LUFactors),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyEval {
    pub base: WalkSpec,
    pub rule: RowRule,
}

/// Value and derivative of a row `(P¹, P²)` at a point.
pub type RowJet = ([f64; 2], [f64; 2]);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolynomialFamily<T> {
    pub tag: FamilyTag,
    pub lo: i64,
    pub hi: i64,
    pub rows: Vec<[Poly<T>; 2]>,
    #[serde(skip)]
    pub eval: Option<FamilyEval>,
}

impl<T: Scalar> PolynomialFamily<T> {
    pub fn contains(&self, n: i64) -> bool {
        self.lo <= n && n <= self.hi
    }

    pub fn row(&self, n: i64) -> &[Poly<T>; 2] {
        assert!(self.contains(n), "row {n} outside family window [{}, {}]", self.lo, self.hi);
        &self.rows[(n - self.lo) as usize]
    }

    fn check_degrees(&self) -> Result<()> {
        for n in self.lo..=self.hi {
            for alpha in 0..2 {
                let expected = expected_degree(self.tag, n, alpha + 1);
                let got = self.row(n)[alpha].degree();
                if got != expected {
                    return Err(ZwalkError::DegreeMismatch { n, alpha: alpha + 1, expected, got });
                }
            }
        }
        Ok(())
    }
}

/// Degree pattern of each family; `None` is the zero polynomial.
pub fn expected_degree(tag: FamilyTag, n: i64, alpha: usize) -> Option<usize> {
    let m = -n - 1;
    match tag {
        FamilyTag::Q | FamilyTag::QTilde | FamilyTag::QHat => match (n >= 0, alpha) {
            (true, 1) => Some(n as usize),
            (true, _) => (n >= 1).then(|| n as usize - 1),
            (false, 1) => (m >= 1).then(|| m as usize - 1),
            (false, _) => Some(m as usize),
        },
        FamilyTag::S => match (n, alpha) {
            (0, _) => Some(0),
            (n, 1) if n > 0 => Some(n as usize),
            (n, _) if n > 0 => Some(n as usize - 1),
            (_, 1) => Some(m as usize),
            _ => Some(m as usize + 1),
        },
        FamilyTag::T => match (n, alpha) {
            (-1, _) => Some(0),
            (n, 1) if n >= 0 => Some(n as usize + 1),
            (n, _) if n >= 0 => Some(n as usize),
            (_, 1) => Some(m as usize - 1),
            _ => Some(m as usize),
        },
    }
}

/// `Q` rows on `[-n-1, n]` from walk coefficients `coef(k) = (aₖ, bₖ, cₖ)`.
pub fn build_q_with<T: Scalar>(coef: impl Fn(i64) -> (T, T, T), n: i64) -> Result<PolynomialFamily<T>> {
    let lo = -n - 1;
    let size = (2 * n + 2) as usize;
    let mut rows: Vec<[Poly<T>; 2]> = vec![[Poly::zero(), Poly::zero()]; size];
    let at = |k: i64| (k - lo) as usize;
    rows[at(0)] = [Poly::constant(T::one()), Poly::zero()];
    rows[at(-1)] = [Poly::zero(), Poly::constant(T::one())];
    for k in 0..n {
        let (a, b, c) = coef(k);
        if a.is_zero() {
            return Err(ZwalkError::DivisionByZeroProbability(k));
        }
        let inv = T::one() / a;
        let next = [0, 1].map(|al| {
            let q = &rows[at(k)][al];
            q.mul_x().sub(&q.scale(&b)).sub(&rows[at(k - 1)][al].scale(&c)).scale(&inv)
        });
        rows[at(k + 1)] = next;
    }
    for k in (-n..=-1).rev() {
        let (a, b, c) = coef(k);
        if c.is_zero() {
            return Err(ZwalkError::DivisionByZeroProbability(k));
        }
        let inv = T::one() / c;
        let prev = [0, 1].map(|al| {
            let q = &rows[at(k)][al];
            q.mul_x().sub(&q.scale(&b)).sub(&rows[at(k + 1)][al].scale(&a)).scale(&inv)
        });
        rows[at(k - 1)] = prev;
    }
    let fam = PolynomialFamily { tag: FamilyTag::Q, lo, hi: n, rows, eval: None };
    fam.check_degrees()?;
    Ok(fam)
}

/// Closed-form leading coefficient of `Qₙᵅ`.
pub fn q_leading<T: Scalar>(a: impl Fn(i64) -> T, c: impl Fn(i64) -> T, n: i64, alpha: usize) -> Option<T> {
    let prod = |f: &dyn Fn(i64) -> T, r: std::ops::RangeInclusive<i64>| r.fold(T::one(), |p, k| p * f(k));
    if n >= 0 {
        let an = prod(&a, 0..=n - 1);
        match alpha {
            1 => Some(T::one() / an),
            _ => (n >= 1).then(|| -c(0) / an),
        }
    } else {
        let m = -n - 1;
        let cn = prod(&c, -m..=-1);
        match alpha {
            1 => (m >= 1).then(|| -a(-1) / cn),
            _ => Some(T::one() / cn),
        }
    }
}

fn coef_of(spec: &WalkSpec) -> impl Fn(i64) -> (f64, f64, f64) + '_ {
    move |k| {
        let q = spec.coeff(k).expect("coverage checked");
        (q.a, q.b, q.c)
    }
}

/// `Q` family of a walk on `[-n-1, n]`; leading coefficients are checked against
/// their closed forms.
pub fn build_q(spec: &WalkSpec, n: i64) -> Result<PolynomialFamily<f64>> {
    spec.require(-n, n - 1)?;
    let mut fam = build_q_with(coef_of(spec), n)?;
    let a = |k: i64| spec.coeff(k).map(|q| q.a).unwrap_or(f64::NAN);
    let c = |k: i64| spec.coeff(k).map(|q| q.c).unwrap_or(f64::NAN);
    for k in fam.lo..=fam.hi {
        for alpha in 1..=2 {
            if let (Some(want), Some(got)) = (q_leading(a, c, k, alpha), fam.row(k)[alpha - 1].leading()) {
                let err = (got - want).abs() / want.abs();
                if err > IDENTITY_TOL {
                    return Err(ZwalkError::IdentityViolated { what: "leading coefficient", n: k, error: err });
                }
            }
        }
    }
    fam.eval = Some(FamilyEval { base: spec.clone(), rule: RowRule::Direct });
    Ok(fam)
}

fn combine<T: Scalar>(p: &[Poly<T>; 2], u: &T, q: &[Poly<T>; 2], v: &T) -> [Poly<T>; 2] {
    [0, 1].map(|al| p[al].scale(u).add(&q[al].scale(v)))
}

/// Coefficientwise agreement relative to the largest coefficient among `terms`.
fn poly_close<T: Scalar>(lhs: &Poly<T>, rhs: &Poly<T>, terms: &[&Poly<T>]) -> bool {
    let mut scale = lhs.max_abs();
    for t in terms.iter().copied().chain([rhs]) {
        let m = t.max_abs();
        if m > scale {
            scale = m;
        }
    }
    lhs.sub(rhs).coeffs.iter().all(|c| c.within(&T::zero(), &scale, IDENTITY_TOL))
}

fn row_scale<T: Scalar>(row: &[Poly<T>; 2]) -> T {
    let (a, b) = (row[0].max_abs(), row[1].max_abs());
    if a > b {
        a
    } else {
        b
    }
}

/// Per-index factor values `(x, y, s, r)` in either order's naming.
pub trait FactorLookup<T> {
    fn get(&self, n: i64) -> (T, T, T, T);
}

impl<T: Clone, F: Fn(i64) -> (T, T, T, T)> FactorLookup<T> for F {
    fn get(&self, n: i64) -> (T, T, T, T) {
        self(n)
    }
}

/// `Sₙ = sₙQₙ + rₙQₙ₋₁` on `lo..=hi`, checking `xQₙ = xₙSₙ₊₁ + yₙSₙ` and the
/// values at zero.
pub fn build_s_with<T: Scalar>(
    q: &PolynomialFamily<T>,
    lo: i64,
    hi: i64,
    f: impl FactorLookup<T>,
) -> Result<PolynomialFamily<T>> {
    let lo = lo.max(q.lo + 1);
    let hi = hi.min(q.hi);
    if lo > -1 || hi < 0 {
        return Err(ZwalkError::WindowTooSmall { need_lo: -1, need_hi: 0, lo, hi });
    }
    let rows: Vec<_> = (lo..=hi)
        .map(|n| {
            let (_, _, s, r) = f.get(n);
            combine(q.row(n), &s, q.row(n - 1), &r)
        })
        .collect();
    let fam = PolynomialFamily { tag: FamilyTag::S, lo, hi, rows, eval: None };
    fam.check_degrees()?;
    for n in lo..hi {
        let (x, y, _, _) = f.get(n);
        let rhs = combine(fam.row(n + 1), &x, fam.row(n), &y);
        for al in 0..2 {
            let lhs = q.row(n)[al].mul_x();
            let err = lhs.rel_distance(&rhs[al]);
            if !poly_close(&lhs, &rhs[al], &[&fam.row(n + 1)[al], &fam.row(n)[al]]) {
                return Err(ZwalkError::IdentityViolated { what: "xQ = xS(n+1) + yS(n)", n, error: err });
            }
        }
    }
    let (_, _, s0, r0) = f.get(0);
    let zero = T::zero();
    let base = [fam.row(0)[0].eval(&zero), fam.row(0)[1].eval(&zero)];
    let mut ratio = T::one();
    for n in 1..=hi {
        let (x, y, _, _) = f.get(n - 1);
        ratio = -ratio * y / x;
        check_zero_values(&fam, n, &base, &ratio, "S at zero")?;
    }
    let mut ratio = T::one();
    for n in (lo..=-1).rev() {
        let (x, y, _, _) = f.get(n);
        ratio = -ratio * x / y;
        check_zero_values(&fam, n, &base, &ratio, "S at zero")?;
    }
    for n in lo..=hi {
        let lhs = s0.clone() * fam.row(n)[1].coeff(0);
        let rhs = r0.clone() * fam.row(n)[0].coeff(0);
        if !lhs.within(&rhs, &row_scale(fam.row(n)), IDENTITY_TOL) {
            let e = (lhs - rhs).to_f64().abs();
            return Err(ZwalkError::IdentityViolated { what: "s0 S2(0) = r0 S1(0)", n, error: e });
        }
    }
    Ok(fam)
}

fn check_zero_values<T: Scalar>(
    fam: &PolynomialFamily<T>,
    n: i64,
    base: &[T; 2],
    ratio: &T,
    what: &'static str,
) -> Result<()> {
    for al in 0..2 {
        let row = &fam.row(n)[al];
        let got = row.coeff(0);
        let want = ratio.clone() * base[al].clone();
        if !got.within(&want, &row.max_abs(), IDENTITY_TOL) {
            let e = (got - want).to_f64().abs();
            return Err(ZwalkError::IdentityViolated { what, n, error: e });
        }
    }
    Ok(())
}

/// `Tₙ = ỹₙQₙ + x̃ₙQₙ₊₁` on `lo..=hi`, checking `xQₙ = r̃ₙTₙ₋₁ + s̃ₙTₙ` and the
/// values at zero. The lookup returns `(x̃, ỹ, s̃, r̃)`.
pub fn build_t_with<T: Scalar>(
    q: &PolynomialFamily<T>,
    lo: i64,
    hi: i64,
    f: impl FactorLookup<T>,
) -> Result<PolynomialFamily<T>> {
    let lo = lo.max(q.lo);
    let hi = hi.min(q.hi - 1);
    if lo > -1 || hi < 0 {
        return Err(ZwalkError::WindowTooSmall { need_lo: -1, need_hi: 0, lo, hi });
    }
    let rows: Vec<_> = (lo..=hi)
        .map(|n| {
            let (x, y, _, _) = f.get(n);
            combine(q.row(n), &y, q.row(n + 1), &x)
        })
        .collect();
    let fam = PolynomialFamily { tag: FamilyTag::T, lo, hi, rows, eval: None };
    fam.check_degrees()?;
    for n in lo + 1..=hi {
        let (_, _, s, r) = f.get(n);
        let rhs = combine(fam.row(n - 1), &r, fam.row(n), &s);
        for al in 0..2 {
            let lhs = q.row(n)[al].mul_x();
            let err = lhs.rel_distance(&rhs[al]);
            if !poly_close(&lhs, &rhs[al], &[&fam.row(n - 1)[al], &fam.row(n)[al]]) {
                return Err(ZwalkError::IdentityViolated { what: "xQ = rT(n-1) + sT(n)", n, error: err });
            }
        }
    }
    let zero = T::zero();
    let base = [fam.row(-1)[0].eval(&zero), fam.row(-1)[1].eval(&zero)];
    let mut ratio = T::one();
    for n in 0..=hi {
        let (_, _, s, r) = f.get(n);
        ratio = -ratio * r / s;
        check_zero_values(&fam, n, &base, &ratio, "T at zero")?;
    }
    let mut ratio = T::one();
    for n in (lo..=-2).rev() {
        let (_, _, s, r) = f.get(n + 1);
        ratio = -ratio * s / r;
        check_zero_values(&fam, n, &base, &ratio, "T at zero")?;
    }
    let (xm, ym, _, _) = f.get(-1);
    for n in lo..=hi {
        let lhs = xm.clone() * fam.row(n)[1].coeff(0);
        let rhs = ym.clone() * fam.row(n)[0].coeff(0);
        if !lhs.within(&rhs, &row_scale(fam.row(n)), IDENTITY_TOL) {
            let e = (lhs - rhs).to_f64().abs();
            return Err(ZwalkError::IdentityViolated { what: "x(-1) T2(0) = y(-1) T1(0)", n, error: e });
        }
    }
    Ok(fam)
}

pub fn build_s(factors: &ULFactors, q: &PolynomialFamily<f64>) -> Result<PolynomialFamily<f64>> {
    let look = |n: i64| (factors.x(n), factors.y(n), factors.s(n), factors.r(n));
    let mut fam = build_s_with(q, factors.lo, factors.hi, look)?;
    if let Some(ev) = &q.eval {
        fam.eval = Some(FamilyEval { base: ev.base.clone(), rule: RowRule::S(factors.clone()) });
    }
    Ok(fam)
}

pub fn build_t(factors: &LUFactors, q: &PolynomialFamily<f64>) -> Result<PolynomialFamily<f64>> {
    let look = |n: i64| (factors.x(n), factors.y(n), factors.s(n), factors.r(n));
    let mut fam = build_t_with(q, factors.lo, factors.hi, look)?;
    if let Some(ev) = &q.eval {
        fam.eval = Some(FamilyEval { base: ev.base.clone(), rule: RowRule::T(factors.clone()) });
    }
    Ok(fam)
}

/// `Q̃ₙ = Sₙ·S₀(x)⁻¹` (or the `T` analogue), where the frame `S₀(x)` stacks rows
/// `0` and `-1` of the family. The determinant is a constant times `x`, so the
/// adjugate products are divided by `x` exactly.
pub fn conjugate_family_with<T: Scalar>(family: &PolynomialFamily<T>) -> Result<PolynomialFamily<T>> {
    let tag = match family.tag {
        FamilyTag::S => FamilyTag::QTilde,
        FamilyTag::T => FamilyTag::QHat,
        other => {
            return Err(ZwalkError::PreconditionViolated(format!("cannot conjugate a {other:?} family")))
        }
    };
    let [f11, f12] = family.row(0).clone();
    let [f21, f22] = family.row(-1).clone();
    let det = f11.mul(&f22).sub(&f12.mul(&f21));
    let d = match (det.degree(), det.div_x()) {
        (Some(1), Ok(q)) => q.coeff(0),
        _ => {
            return Err(ZwalkError::InexactDivision { n: 0, remainder: det.coeff(0).to_f64().abs() });
        }
    };
    let inv = T::one() / d;
    let mut rows = Vec::new();
    for n in family.lo..=family.hi {
        let [p1, p2] = family.row(n);
        let num1 = p1.mul(&f22).sub(&p2.mul(&f21));
        let num2 = p2.mul(&f11).sub(&p1.mul(&f12));
        let mut out = [Poly::zero(), Poly::zero()];
        for (k, num) in [num1, num2].into_iter().enumerate() {
            let scale = num.max_abs();
            out[k] = num.div_x().map_err(|rem| ZwalkError::InexactDivision {
                n,
                remainder: if scale.is_zero() { 0.0 } else { (rem / scale).to_f64() },
            })?;
            out[k] = out[k].scale(&inv);
        }
        rows.push(out);
    }
    let fam = PolynomialFamily { tag, lo: family.lo, hi: family.hi, rows, eval: None };
    fam.check_degrees()?;
    Ok(fam)
}

/// Conjugated family; `f64` rows are evaluated through the Darboux walk's recurrence.
pub fn conjugate_family(family: &PolynomialFamily<f64>) -> Result<PolynomialFamily<f64>> {
    let mut fam = conjugate_family_with(family)?;
    if let Some(ev) = &family.eval {
        let dw = match &ev.rule {
            RowRule::S(f) => darboux::darboux(&ev.base, &Factors::Ul(f.clone()))?,
            RowRule::T(f) => darboux::darboux(&ev.base, &Factors::Lu(f.clone()))?,
            RowRule::Direct => unreachable!("tag checked above"),
        };
        fam.eval = Some(FamilyEval { base: dw.spec, rule: RowRule::Direct });
    }
    Ok(fam)
}

/// Largest relative defect of `xPₙ = aₙPₙ₊₁ + bₙPₙ + cₙPₙ₋₁` over rows with both neighbours.
pub fn recurrence_residual(family: &PolynomialFamily<f64>, spec: &WalkSpec) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for n in family.lo + 1..family.hi {
        let q = spec.coeff(n)?;
        for al in 0..2 {
            let lhs = family.row(n)[al].mul_x();
            let terms = [family.row(n + 1)[al].scale(&q.a), family.row(n)[al].scale(&q.b), family.row(n - 1)[al].scale(&q.c)];
            let rhs = terms[0].add(&terms[1]).add(&terms[2]);
            let scale = terms.iter().map(|t| t.max_abs()).fold(lhs.max_abs(), f64::max);
            if scale > 0.0 {
                worst = worst.max(lhs.rel_distance(&rhs) * lhs.max_abs().max(rhs.max_abs()) / scale);
            }
        }
    }
    Ok(worst)
}

/// Three-term solutions `Q_k` with derivatives for `k ∈ lo..=hi`, or `None`
/// when the walk lacks the coefficients.
pub fn q_jets(spec: &WalkSpec, x: f64, lo: i64, hi: i64) -> Option<Vec<RowJet>> {
    let lo = lo.min(-1);
    let hi = hi.max(0);
    if !spec.covers(lo + 1, hi - 1) {
        return None;
    }
    let mut out = vec![([0.0; 2], [0.0; 2]); (hi - lo + 1) as usize];
    let at = |k: i64| (k - lo) as usize;
    out[at(0)] = ([1.0, 0.0], [0.0; 2]);
    out[at(-1)] = ([0.0, 1.0], [0.0; 2]);
    for k in 0..hi {
        let q = spec.coeff(k).ok()?;
        let (p, dp) = out[at(k)];
        let (m, dm) = out[at(k - 1)];
        let mut v = [0.0; 2];
        let mut d = [0.0; 2];
        for al in 0..2 {
            v[al] = ((x - q.b) * p[al] - q.c * m[al]) / q.a;
            d[al] = (p[al] + (x - q.b) * dp[al] - q.c * dm[al]) / q.a;
        }
        out[at(k + 1)] = (v, d);
    }
    for k in (lo + 1..=-1).rev() {
        let q = spec.coeff(k).ok()?;
        let (p, dp) = out[at(k)];
        let (m, dm) = out[at(k + 1)];
        let mut v = [0.0; 2];
        let mut d = [0.0; 2];
        for al in 0..2 {
            v[al] = ((x - q.b) * p[al] - q.a * m[al]) / q.c;
            d[al] = (p[al] + (x - q.b) * dp[al] - q.a * dm[al]) / q.c;
        }
        out[at(k - 1)] = (v, d);
    }
    Some(out)
}

impl PolynomialFamily<f64> {
    /// Value and derivative of every row at `x`, in window order.
    pub fn jets(&self, x: f64) -> Vec<RowJet> {
        let from_table = || {
            self.rows
                .iter()
                .map(|[p1, p2]| {
                    let (v1, d1) = p1.eval_with_derivative(x);
                    let (v2, d2) = p2.eval_with_derivative(x);
                    ([v1, v2], [d1, d2])
                })
                .collect()
        };
        let Some(ev) = &self.eval else { return from_table() };
        let (qlo, qhi) = match ev.rule {
            RowRule::Direct => (self.lo, self.hi),
            RowRule::S(_) => (self.lo - 1, self.hi),
            RowRule::T(_) => (self.lo, self.hi + 1),
        };
        let Some(q) = q_jets(&ev.base, x, qlo, qhi) else { return from_table() };
        let qlo = qlo.min(-1);
        let qa = |k: i64| q[(k - qlo) as usize];
        let mix = |u: f64, p: RowJet, v: f64, m: RowJet| -> RowJet {
            (
                [u * p.0[0] + v * m.0[0], u * p.0[1] + v * m.0[1]],
                [u * p.1[0] + v * m.1[0], u * p.1[1] + v * m.1[1]],
            )
        };
        (self.lo..=self.hi)
            .map(|n| match &ev.rule {
                RowRule::Direct => qa(n),
                RowRule::S(f) => mix(f.s(n), qa(n), f.r(n), qa(n - 1)),
                RowRule::T(f) => mix(f.y(n), qa(n), f.x(n), qa(n + 1)),
            })
            .collect()
    }

    pub fn jet(&self, n: i64, x: f64) -> RowJet {
        assert!(self.contains(n), "row {n} outside family window");
        self.jets(x)[(n - self.lo) as usize]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialCoefficients {
    pub lo: i64,
    pub hi: i64,
    /// `πₙ` for `n ∈ lo..=hi`, `π₀ = 1`.
    pub pi: Vec<f64>,
    /// `αₙ = c₁⋯cₙ` for `n = 0..=hi`.
    pub alpha: Vec<f64>,
    /// `βₙ = a₋₁⋯a₋ₙ₋₁ / c₀` for `n = 0..=-lo-1`.
    pub beta: Vec<f64>,
}

impl PotentialCoefficients {
    pub fn pi(&self, n: i64) -> f64 {
        assert!(self.lo <= n && n <= self.hi, "potential index {n} outside [{}, {}]", self.lo, self.hi);
        self.pi[(n - self.lo) as usize]
    }

    /// Largest relative defect of `(πP)ₙ = πₙ` on interior indices.
    pub fn invariance_defect(&self, spec: &WalkSpec) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for n in self.lo + 1..self.hi {
            let up = self.pi(n - 1) * spec.coeff(n - 1)?.a;
            let stay = self.pi(n) * spec.coeff(n)?.b;
            let down = self.pi(n + 1) * spec.coeff(n + 1)?.c;
            worst = worst.max(((up + stay + down) - self.pi(n)).abs() / self.pi(n));
        }
        Ok(worst)
    }
}

/// Potential coefficients on `[-n, n]`.
pub fn potentials(spec: &WalkSpec, n: i64) -> Result<PotentialCoefficients> {
    spec.require(-n, n)?;
    let co = |k: i64| spec.coeff(k).expect("coverage checked");
    let mut pi = vec![0.0; (2 * n + 1) as usize];
    let at = |k: i64| (k + n) as usize;
    pi[at(0)] = 1.0;
    for k in 1..=n {
        pi[at(k)] = pi[at(k - 1)] * co(k - 1).a / co(k).c;
        pi[at(-k)] = pi[at(-k + 1)] * co(-k + 1).c / co(-k).a;
    }
    let mut alpha = vec![1.0];
    for k in 1..=n {
        alpha.push(alpha[(k - 1) as usize] * co(k).c);
    }
    let mut beta = Vec::new();
    let mut b = 1.0 / co(0).c;
    for k in 0..n {
        b *= co(-k - 1).a;
        beta.push(b);
    }
    let pot = PotentialCoefficients { lo: -n, hi: n, pi, alpha, beta };
    let defect = pot.invariance_defect(spec)?;
    if defect > IDENTITY_TOL {
        return Err(ZwalkError::IdentityViolated { what: "pi P = pi", n: 0, error: defect });
    }
    Ok(pot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contfrac;
    use crate::factorization::{factor_lu, factor_ul};

    #[test]
    fn first_rows_by_hand() {
        let w = WalkSpec::constant(0.25, 0.5, 0.25).unwrap();
        let q = build_q(&w, 3).unwrap();
        assert_eq!(q.row(1)[0].coeffs, vec![-2.0, 4.0]);
        assert_eq!(q.row(-2)[1].coeffs, vec![-2.0, 4.0]);
        assert_eq!(q.row(0)[0].coeffs, vec![1.0]);
        assert_eq!(q.row(-1)[1].coeffs, vec![1.0]);
        assert!(q.row(0)[1].coeffs.is_empty());
    }

    #[test]
    fn recurrence_jets_match_table() {
        let w = WalkSpec::force(0.125, 0.375).unwrap();
        let q = build_q(&w, 5).unwrap();
        for x in [-0.7, 0.1, 0.93] {
            let jets = q.jets(x);
            for n in q.lo..=q.hi {
                for al in 0..2 {
                    let (v, d) = q.row(n)[al].eval_with_derivative(x);
                    let (jv, jd) = (jets[(n - q.lo) as usize].0[al], jets[(n - q.lo) as usize].1[al]);
                    assert!((v - jv).abs() < 1e-9 * (1.0 + v.abs()));
                    assert!((d - jd).abs() < 1e-9 * (1.0 + d.abs()));
                }
            }
        }
    }

    #[test]
    fn s_family_initial_rows() {
        let w = WalkSpec::constant(0.125, 0.75, 0.125).unwrap();
        let f = factor_ul(&w, 0.4, 6).unwrap();
        let q = build_q(&w, 5).unwrap();
        let s = build_s(&f, &q).unwrap();
        assert_eq!(s.row(0)[0].coeffs, vec![f.s(0)]);
        assert_eq!(s.row(0)[1].coeffs, vec![f.r(0)]);
        let want = -f.x(-1) * f.s(0) / f.y(-1);
        assert!((s.row(-1)[0].coeff(0) - want).abs() < 1e-14);
        assert_eq!(s.row(-1)[0].degree(), Some(0));
    }

    #[test]
    fn t_family_initial_rows() {
        let w = WalkSpec::force(0.1, 0.3).unwrap();
        let f = factor_lu(&w, 0.55, 6).unwrap();
        let q = build_q(&w, 5).unwrap();
        let t = build_t(&f, &q).unwrap();
        assert_eq!(t.row(-1)[0].coeffs, vec![f.x(-1)]);
        assert_eq!(t.row(-1)[1].coeffs, vec![f.y(-1)]);
        assert_eq!(t.row(0)[0].degree(), Some(1));
    }

    #[test]
    fn conjugate_at_boundary_recovers_q() {
        let w = WalkSpec::constant(0.125, 0.75, 0.125).unwrap();
        let h = contfrac::limits(&w, 1e-13, 100).unwrap().h;
        let f = factor_ul(&w, h, 8).unwrap();
        let q = build_q(&w, 6).unwrap();
        let qt = conjugate_family(&build_s(&f, &q).unwrap()).unwrap();
        for n in qt.lo..=qt.hi {
            for al in 0..2 {
                assert!(qt.row(n)[al].rel_distance(&q.row(n)[al]) < 1e-11, "row {n}");
            }
        }
    }

    #[test]
    fn conjugated_rows_follow_darboux_recurrence() {
        let w = WalkSpec::force(0.1, 0.3).unwrap();
        for p in [0.5, 0.6] {
            let fu = factor_ul(&w, p, 9).unwrap();
            let fl = factor_lu(&w, p, 9).unwrap();
            let q = build_q(&w, 7).unwrap();
            let qt = conjugate_family(&build_s(&fu, &q).unwrap()).unwrap();
            let qh = conjugate_family(&build_t(&fl, &q).unwrap()).unwrap();
            let dt = darboux::darboux_ul(&w, &fu).unwrap();
            let dh = darboux::darboux_lu(&w, &fl).unwrap();
            assert!(recurrence_residual(&qt, &dt.spec).unwrap() < 1e-11);
            assert!(recurrence_residual(&qh, &dh.spec).unwrap() < 1e-11);
            assert_eq!(qt.row(0)[0].coeffs, vec![1.0]);
            assert!(qt.row(-1)[0].coeffs.is_empty());
        }
    }

    #[test]
    fn potentials_examples() {
        let p = potentials(&WalkSpec::constant(0.2, 0.6, 0.2).unwrap(), 4).unwrap();
        assert!(p.pi.iter().all(|v| (v - 1.0).abs() < 1e-15));
        let p = potentials(&WalkSpec::force(0.125, 0.375).unwrap(), 4).unwrap();
        assert!((p.pi(1) - 1.0 / 3.0).abs() < 1e-15);
        assert!((p.pi(-1) - 1.0).abs() < 1e-15);
        let p = potentials(&WalkSpec::constant(0.25, 0.5, 0.25).unwrap(), 3).unwrap();
        assert!((p.alpha[2] - 1.0 / 16.0).abs() < 1e-16);
        assert!((p.beta[0] - 1.0).abs() < 1e-16);
    }

    #[test]
    fn exact_rational_identities() {
        use crate::factorization::g_plain;
        use crate::scalar::ratio;
        use num_rational::BigRational;
        let (a, b, c) = (ratio(1, 8), ratio(3, 4), ratio(1, 8));
        let one = BigRational::from_integer(1.into());
        let g = g_plain(|_| a.clone(), |_| c.clone(), ratio(2, 5), -6, 6);
        let at = |n: i64| g[(n + 6) as usize].clone();
        let q = build_q_with(|_| (a.clone(), b.clone(), c.clone()), 4).unwrap();
        // UL: y = g, x = 1 - g, r = c/g, s = 1 - r
        let ul = |n: i64| {
            let r = c.clone() / at(n);
            (one.clone() - at(n), at(n), one.clone() - r.clone(), r)
        };
        let s = build_s_with(&q, -5, 5, ul).unwrap();
        let qt = conjugate_family_with(&s).unwrap();
        assert_eq!(qt.row(0)[0].coeffs, vec![one.clone()]);
        // LU: r~ = g, s~ = 1 - g, x~ = a/(1-g), y~ = 1 - x~
        let lu = |n: i64| {
            let x = a.clone() / (one.clone() - at(n));
            (x.clone(), one.clone() - x, one.clone() - at(n), at(n))
        };
        let t = build_t_with(&q, -5, 5, lu).unwrap();
        let qh = conjugate_family_with(&t).unwrap();
        assert_eq!(qh.row(-1)[1].coeffs, vec![one]);
    }
}
