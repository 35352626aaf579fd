//! 2×2 matrix measures: the closed-form spectra of the constant and force
//! walks, Geronimus transformations, degree-one conjugations, moments and
//! pairings by endpoint-aware quadrature.
//!
//! Atoms are stored factored as `F(x)·M·F(x)ᵀ` evaluated at the atom, with `F`
//! a matrix polynomial. Conjugating a measure composes frames instead of
//! multiplying the masses out, which keeps rank-deficient masses exact.

use std::f64::consts::PI;
use std::fmt;
use std::num::NonZeroUsize;
use std::sync::Arc;

use gauss_quad::GaussLegendre;
use nalgebra::Matrix2;
use serde::Serialize;

use crate::contfrac;
use crate::error::{Result, ZwalkError};
use crate::factorization::{Factors, LUFactors, Order, ULFactors};
use crate::polynomials::{Poly, RowJet};
use crate::walk::WalkSpec;

pub type Mat2 = Matrix2<f64>;

pub const DEFAULT_NODES: usize = 512;
/// Environment variable overriding [`DEFAULT_NODES`].
pub const NODES_ENV: &str = "ZWALK_NODES";
/// Atoms closer than this to a point are treated as sitting on it.
pub const LOCATION_TOL: f64 = 1e-12;

pub fn default_nodes() -> usize {
    std::env::var(NODES_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(DEFAULT_NODES)
}

/// Behaviour of the density at a support endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Exponent {
    /// `(x − σ)^{1/2}`
    SqrtVanishing,
    /// `(x − σ)^{−1/2}`
    InverseSqrt,
    /// No declared singular behaviour.
    Regular,
}

impl Exponent {
    pub fn value(self) -> f64 {
        match self {
            Exponent::SqrtVanishing => 0.5,
            Exponent::InverseSqrt => -0.5,
            Exponent::Regular => 0.0,
        }
    }
}

pub type Density = Arc<dyn Fn(f64) -> Mat2 + Send + Sync>;

/// Density `(x − lo)^{eₗ}(hi − x)^{eᵣ}·R(x)` on `[lo, hi]` with `R` smooth there.
#[derive(Clone)]
pub struct AcPart {
    pub lo: f64,
    pub hi: f64,
    pub left: Exponent,
    pub right: Exponent,
    pub regular: Density,
}

impl fmt::Debug for AcPart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AcPart")
            .field("lo", &self.lo)
            .field("hi", &self.hi)
            .field("left", &self.left)
            .field("right", &self.right)
            .finish_non_exhaustive()
    }
}

impl AcPart {
    pub fn weight(&self, x: f64) -> f64 {
        (x - self.lo).powf(self.left.value()) * (self.hi - x).powf(self.right.value())
    }

    /// Density at `x`; zero off the open support.
    pub fn density(&self, x: f64) -> Mat2 {
        if x <= self.lo || x >= self.hi {
            return Mat2::zeros();
        }
        (self.regular)(x) * self.weight(x)
    }

    /// Quadrature points `x` with matrix weights, `∫f·dΨ ≈ Σ f(x)·W`.
    ///
    /// With `x = m + h·cosθ` the endpoint factors become powers of `1 ± cosθ`.
    /// For ±1/2 exponents at both ends these powers are 0 or 1 and the midpoint
    /// rule in θ is spectrally accurate; otherwise Gauss–Legendre in θ.
    pub fn nodes(&self, n: usize) -> Vec<(f64, Mat2)> {
        let n = n.max(1);
        let (m, h) = (0.5 * (self.lo + self.hi), 0.5 * (self.hi - self.lo));
        let (el, er) = (self.left.value(), self.right.value());
        let scale = h.powf(1.0 + el + er);
        let point = |theta: f64, w: f64| {
            let (s, c) = (theta.sin(), theta.cos());
            // 1 − cosθ and 1 + cosθ without cancellation near the ends
            let (minus, plus) = if c > 0.0 { (s * s / (1.0 + c), 1.0 + c) } else { (1.0 - c, s * s / (1.0 - c)) };
            let x = m + h * c;
            let factor = scale * plus.powf(el + 0.5) * minus.powf(er + 0.5);
            (x, (self.regular)(x) * (w * factor))
        };
        let chebyshev = |e: Exponent| matches!(e, Exponent::SqrtVanishing | Exponent::InverseSqrt);
        if chebyshev(self.left) && chebyshev(self.right) {
            let w = PI / n as f64;
            (1..=n).map(|k| point((k as f64 - 0.5) * w, w)).collect()
        } else {
            let gl = GaussLegendre::new(NonZeroUsize::new(n).expect("n >= 1"));
            gl.as_node_weight_pairs()
                .iter()
                .map(|&(t, w)| point(0.5 * PI * (t + 1.0), 0.5 * PI * w))
                .collect()
        }
    }

    fn map(&self, f: impl Fn(f64, Mat2) -> Mat2 + Send + Sync + 'static) -> AcPart {
        let reg = self.regular.clone();
        AcPart { regular: Arc::new(move |x| f(x, reg(x))), ..self.clone() }
    }

    /// The part `k·D(x)/x`, or `DivergentMoment` when `1/x` is not integrable.
    pub fn divided_by_x(&self, k: f64) -> Result<AcPart> {
        let zero_at = |p: f64| p.abs() <= LOCATION_TOL;
        if self.lo < -LOCATION_TOL && self.hi > LOCATION_TOL {
            return Err(ZwalkError::DivergentMoment(format!(
                "0 lies inside the support [{}, {}]",
                self.lo, self.hi
            )));
        }
        let mut out = self.clone();
        if zero_at(self.lo) {
            if self.left != Exponent::SqrtVanishing {
                return Err(ZwalkError::DivergentMoment(format!(
                    "density at the endpoint 0 has exponent {:?}",
                    self.left
                )));
            }
            // x^{1/2}/x = x^{-1/2}
            out.lo = 0.0;
            out.left = Exponent::InverseSqrt;
            return Ok(out.map(move |_, r| r * k));
        }
        if zero_at(self.hi) {
            if self.right != Exponent::SqrtVanishing {
                return Err(ZwalkError::DivergentMoment(format!(
                    "density at the endpoint 0 has exponent {:?}",
                    self.right
                )));
            }
            // (−x)^{1/2}/x = −(−x)^{-1/2}
            out.hi = 0.0;
            out.right = Exponent::InverseSqrt;
            return Ok(out.map(move |_, r| r * -k));
        }
        Ok(self.map(move |x, r| r * (k / x)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AtomOrder {
    /// Pairs to `(L F M Fᵀ Rᵀ)(t)`.
    Point,
    /// Pairs to `d/dx (L F M Fᵀ Rᵀ)(t)`, i.e. the measure carries `−M δ′_t`.
    Derivative,
}

/// Matrix polynomial with ascending coefficients.
pub type MatPoly = Vec<Mat2>;

fn mat_poly_jet(p: &[Mat2], x: f64) -> (Mat2, Mat2) {
    let (mut v, mut d) = (Mat2::zeros(), Mat2::zeros());
    for c in p.iter().rev() {
        d = d * x + v;
        v = v * x + c;
    }
    (v, d)
}

fn mat_poly_mul(a: &[Mat2], b: &[Mat2]) -> MatPoly {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![Mat2::zeros(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub at: f64,
    pub order: AtomOrder,
    pub mass: Mat2,
    /// `F`; a single identity coefficient for plain atoms.
    pub frame: MatPoly,
}

fn row_vec(v: [f64; 2]) -> nalgebra::RowVector2<f64> {
    nalgebra::RowVector2::new(v[0], v[1])
}

impl Atom {
    pub fn plain(at: f64, mass: Mat2) -> Self {
        Atom { at, order: AtomOrder::Point, mass, frame: vec![Mat2::identity()] }
    }

    /// `F(t)·M·F(t)ᵀ`.
    pub fn effective_mass(&self) -> Mat2 {
        let (f, _) = mat_poly_jet(&self.frame, self.at);
        f * self.mass * f.transpose()
    }

    /// Contribution to the pairing of rows given by their value and derivative at `t`.
    pub fn pair(&self, left: RowJet, right: RowJet) -> f64 {
        let (f, df) = mat_poly_jet(&self.frame, self.at);
        let (l, dl) = (row_vec(left.0), row_vec(left.1));
        let (r, dr) = (row_vec(right.0), row_vec(right.1));
        let (u, v) = (l * f, r * f);
        match self.order {
            AtomOrder::Point => (u * self.mass * v.transpose())[0],
            AtomOrder::Derivative => {
                let (du, dv) = (dl * f + l * df, dr * f + r * df);
                (du * self.mass * v.transpose() + u * self.mass * dv.transpose())[0]
            }
        }
    }

    /// Contribution to `∫xᵏ dΨ`.
    pub fn moment(&self, k: i32) -> Mat2 {
        let (f, df) = mat_poly_jet(&self.frame, self.at);
        let t = self.at;
        let fm = f * self.mass * f.transpose();
        match self.order {
            AtomOrder::Point => fm * t.powi(k),
            AtomOrder::Derivative => {
                let dk = if k == 0 { 0.0 } else { k as f64 * t.powi(k - 1) };
                let dfm = df * self.mass * f.transpose() + f * self.mass * df.transpose();
                fm * dk + dfm * t.powi(k)
            }
        }
    }
}

/// Which factorization a measure or frame belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrameTag {
    pub order: Order,
    pub param: f64,
}

#[derive(Debug, Clone)]
pub struct MatrixMeasure {
    pub ac: AcPart,
    pub atoms: Vec<Atom>,
    /// Set on Geronimus transforms awaiting their conjugation.
    pub tag: Option<FrameTag>,
}

impl MatrixMeasure {
    pub fn support(&self) -> (f64, f64) {
        (self.ac.lo, self.ac.hi)
    }

    pub fn density(&self, x: f64) -> Mat2 {
        self.ac.density(x)
    }

    /// Sum of effective point masses at `t` (derivative atoms excluded).
    pub fn point_mass_at(&self, t: f64) -> Mat2 {
        self.atoms
            .iter()
            .filter(|a| a.order == AtomOrder::Point && (a.at - t).abs() <= LOCATION_TOL)
            .map(Atom::effective_mass)
            .fold(Mat2::zeros(), |s, m| s + m)
    }

    pub fn derivative_mass_at(&self, t: f64) -> Mat2 {
        self.atoms
            .iter()
            .filter(|a| a.order == AtomOrder::Derivative && (a.at - t).abs() <= LOCATION_TOL)
            .map(Atom::effective_mass)
            .fold(Mat2::zeros(), |s, m| s + m)
    }

    /// Distinct atom locations, ascending.
    pub fn atom_locations(&self) -> Vec<f64> {
        let mut ts: Vec<f64> = self.atoms.iter().map(|a| a.at).collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup_by(|a, b| (*a - *b).abs() <= LOCATION_TOL);
        ts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moment {
    pub order: i32,
    pub value: Mat2,
}

fn sym(a: f64, b: f64, d: f64) -> Mat2 {
    Mat2::new(a, b, b, d)
}

fn sigmas(a: f64, c: f64) -> (f64, f64) {
    let (ra, rc) = (a.sqrt(), c.sqrt());
    (1.0 - (ra + rc).powi(2), 1.0 - (ra - rc).powi(2))
}

fn constant_spectrum(a: f64, b: f64, c: f64) -> MatrixMeasure {
    let (lo, hi) = sigmas(a, c);
    let regular: Density = Arc::new(move |x| {
        let off = (x - b) / (2.0 * c);
        sym(1.0, off, a / c) / PI
    });
    MatrixMeasure {
        ac: AcPart { lo, hi, left: Exponent::InverseSqrt, right: Exponent::InverseSqrt, regular },
        atoms: Vec::new(),
        tag: None,
    }
}

fn force_spectrum(a: f64, c: f64) -> MatrixMeasure {
    let b = 1.0 - a - c;
    let (lo, hi) = sigmas(a, c);
    let regular: Density = Arc::new(move |x| {
        let off = (x - b) / (a + c);
        sym(1.0, off, 1.0) * ((a + c) / (2.0 * PI * c * (1.0 - x) * (x - 2.0 * b + 1.0)))
    });
    let mut atoms = Vec::new();
    if c > a {
        let k = (c - a) / (2.0 * c);
        atoms.push(Atom::plain(2.0 * b - 1.0, sym(k, -k, k)));
        atoms.push(Atom::plain(1.0, sym(k, k, k)));
    }
    MatrixMeasure {
        ac: AcPart { lo, hi, left: Exponent::SqrtVanishing, right: Exponent::SqrtVanishing, regular },
        atoms,
        tag: None,
    }
}

/// Closed-form spectral matrix of a constant or force walk.
pub fn example_spectrum(spec: &WalkSpec) -> Result<MatrixMeasure> {
    match *spec {
        WalkSpec::Constant { a, b, c } => Ok(constant_spectrum(a, b, c)),
        WalkSpec::Force { a, c } => {
            contfrac::limits(spec, contfrac::DEFAULT_TOL, contfrac::DEFAULT_MAX_DEPTH).map_err(|e| {
                ZwalkError::PreconditionViolated(format!("force parameters ({a}, {c}) outside the factorizable range: {e}"))
            })?;
            if a == c {
                Ok(constant_spectrum(a, 1.0 - a - c, c))
            } else {
                Ok(force_spectrum(a, c))
            }
        }
        WalkSpec::Table { .. } => Err(ZwalkError::PreconditionViolated(
            "no closed-form spectrum for table walks".into(),
        )),
    }
}

/// `∫xᵏ dΨ` for `k ≥ −1`.
pub fn moment(measure: &MatrixMeasure, k: i32, nodes: usize) -> Result<Moment> {
    if k < -1 {
        return Err(ZwalkError::PreconditionViolated(format!("moment order {k} < -1")));
    }
    if k == -1 {
        if let Some(a) = measure.atoms.iter().find(|a| a.at.abs() <= LOCATION_TOL) {
            return Err(ZwalkError::DivergentMoment(format!("atom at {} makes M(-1) undefined", a.at)));
        }
        return regular_inverse_moment(measure, nodes).map(|value| Moment { order: -1, value });
    }
    let mut value = measure.ac.nodes(nodes).into_iter().fold(Mat2::zeros(), |s, (x, w)| s + w * x.powi(k));
    for a in &measure.atoms {
        value += a.moment(k);
    }
    Ok(Moment { order: k, value })
}

/// `∫dΨ(x)/x` over the AC part and the atoms away from 0.
pub fn regular_inverse_moment(measure: &MatrixMeasure, nodes: usize) -> Result<Mat2> {
    let ac = measure.ac.divided_by_x(1.0)?;
    let mut value = ac.nodes(nodes).into_iter().fold(Mat2::zeros(), |s, (_, w)| s + w);
    for a in measure.atoms.iter().filter(|a| a.at.abs() > LOCATION_TOL) {
        value += a.moment(-1);
    }
    if !value.iter().all(|v| v.is_finite()) {
        return Err(ZwalkError::DivergentMoment("non-finite inverse moment".into()));
    }
    Ok(value)
}

fn geronimus(measure: &MatrixMeasure, k: f64, extra: Mat2, tag: FrameTag) -> Result<MatrixMeasure> {
    if measure.tag.is_some() {
        return Err(ZwalkError::FrameMismatch("measure is already a Geronimus transform".into()));
    }
    let ac = measure.ac.divided_by_x(k)?;
    let mut atoms = Vec::new();
    for a in &measure.atoms {
        if a.at.abs() > LOCATION_TOL {
            let mass = match a.order {
                AtomOrder::Point => a.mass * (k / a.at),
                AtomOrder::Derivative => {
                    return Err(ZwalkError::PreconditionViolated("cannot divide a derivative atom by x".into()))
                }
            };
            atoms.push(Atom { mass, ..a.clone() });
        } else {
            match a.order {
                AtomOrder::Point => atoms.push(Atom { order: AtomOrder::Derivative, mass: a.mass * k, ..a.clone() }),
                AtomOrder::Derivative => {
                    return Err(ZwalkError::PreconditionViolated("derivative atom at the Geronimus point".into()))
                }
            }
        }
    }
    atoms.push(Atom::plain(0.0, extra));
    Ok(MatrixMeasure { ac, atoms, tag: Some(tag) })
}

/// `Ψ_S = (y₀/s₀)·Ψ/x + [diag(1/s₀, 1/r₀) − (y₀/s₀)·M₋₁]·δ₀`, where `M₋₁`
/// excludes any atom at 0 (that atom becomes a derivative atom instead).
pub fn geronimus_ul(measure: &MatrixMeasure, f: &ULFactors, m_inv: &Mat2) -> Result<MatrixMeasure> {
    let k = f.y(0) / f.s(0);
    let extra = Mat2::new(1.0 / f.s(0), 0.0, 0.0, 1.0 / f.r(0)) - m_inv * k;
    geronimus(measure, k, extra, FrameTag { order: Order::Ul, param: f.param })
}

/// `Ψ_T = (s̃₀/ỹ₀)·Ψ/x + [(â₋₁/ĉ₀)·diag(1/x̃₋₁, 1/ỹ₋₁) − (s̃₀/ỹ₀)·M₋₁]·δ₀`
/// with `â₋₁/ĉ₀ = x̃₋₁s̃₀/(ỹ₀r̃₀)`.
pub fn geronimus_lu(measure: &MatrixMeasure, f: &LUFactors, m_inv: &Mat2) -> Result<MatrixMeasure> {
    let k = f.s(0) / f.y(0);
    let ratio = f.x(-1) * f.s(0) / (f.y(0) * f.r(0));
    let extra = Mat2::new(ratio / f.x(-1), 0.0, 0.0, ratio / f.y(-1)) - m_inv * k;
    geronimus(measure, k, extra, FrameTag { order: Order::Lu, param: f.param })
}

/// Degree-one frame `F(x) = A + Bx` (`S₀` or `T₀`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Frame {
    pub tag: FrameTag,
    pub a: Mat2,
    pub b: Mat2,
}

impl Frame {
    pub fn eval(&self, x: f64) -> Mat2 {
        self.a + self.b * x
    }
}

/// `S₀(x)`: rows `S₀` and `S₋₁` of the `S` family.
pub fn ul_frame(f: &ULFactors) -> Frame {
    let q = f.x(-1) / f.y(-1);
    Frame {
        tag: FrameTag { order: Order::Ul, param: f.param },
        a: Mat2::new(f.s(0), f.r(0), -q * f.s(0), -q * f.r(0)),
        b: Mat2::new(0.0, 0.0, 0.0, 1.0 / f.y(-1)),
    }
}

/// `T₀(x)`: rows `T₀` and `T₋₁` of the `T` family.
pub fn lu_frame(f: &LUFactors) -> Frame {
    let q = f.r(0) / f.s(0);
    Frame {
        tag: FrameTag { order: Order::Lu, param: f.param },
        a: Mat2::new(-q * f.x(-1), -q * f.y(-1), f.x(-1), f.y(-1)),
        b: Mat2::new(1.0 / f.s(0), 0.0, 0.0, 0.0),
    }
}

/// `F(x)·Ψ(x)·F(x)ᵀ`.
pub fn conjugate(measure: &MatrixMeasure, frame: &Frame) -> Result<MatrixMeasure> {
    match measure.tag {
        Some(t) if t == frame.tag => {}
        other => {
            return Err(ZwalkError::FrameMismatch(format!(
                "frame built for {:?} applied to a measure tagged {:?}",
                frame.tag, other
            )))
        }
    }
    let fr = *frame;
    let ac = measure.ac.map(move |x, r| {
        let f = fr.eval(x);
        f * r * f.transpose()
    });
    let outer = [frame.a, frame.b];
    let atoms = measure
        .atoms
        .iter()
        .map(|a| Atom { frame: mat_poly_mul(&outer, &a.frame), ..a.clone() })
        .collect();
    Ok(MatrixMeasure { ac, atoms, tag: None })
}

/// Spectral matrix of the Darboux walk built from `factors`.
pub fn darboux_spectrum(measure: &MatrixMeasure, factors: &Factors, nodes: usize) -> Result<MatrixMeasure> {
    let m_inv = regular_inverse_moment(measure, nodes)?;
    match factors {
        Factors::Ul(f) => conjugate(&geronimus_ul(measure, f, &m_inv)?, &ul_frame(f)),
        Factors::Lu(f) => conjugate(&geronimus_lu(measure, f, &m_inv)?, &lu_frame(f)),
    }
}

/// `∫ L(x)·dΨ(x)·R(x)ᵀ` for rows given by value-and-derivative closures.
pub fn pair_jets(
    measure: &MatrixMeasure,
    left: impl Fn(f64) -> RowJet,
    right: impl Fn(f64) -> RowJet,
    nodes: usize,
) -> f64 {
    let mut total = 0.0;
    for (x, w) in measure.ac.nodes(nodes) {
        let (l, r) = (row_vec(left(x).0), row_vec(right(x).0));
        total += (l * w * r.transpose())[0];
    }
    for a in &measure.atoms {
        total += a.pair(left(a.at), right(a.at));
    }
    total
}

fn poly_row_jet(row: &[Poly<f64>; 2], x: f64) -> RowJet {
    let (v1, d1) = row[0].eval_with_derivative(x);
    let (v2, d2) = row[1].eval_with_derivative(x);
    ([v1, v2], [d1, d2])
}

/// `∫ left(x)·dΨ(x)·right(x)ᵀ` for rows of scalar polynomials.
pub fn pair(measure: &MatrixMeasure, left: &[Poly<f64>; 2], right: &[Poly<f64>; 2], nodes: usize) -> f64 {
    pair_jets(measure, |x| poly_row_jet(left, x), |x| poly_row_jet(right, x), nodes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Recurrence {
    Transient,
    NullRecurrent,
    PositiveRecurrent,
}

/// Recurrence type read off the jump at 1 and the right-endpoint exponent.
pub fn classify_recurrence(measure: &MatrixMeasure) -> Result<Recurrence> {
    let jump = measure.point_mass_at(1.0);
    if jump.iter().any(|v| v.abs() > 1e-12) {
        return Ok(Recurrence::PositiveRecurrent);
    }
    let (_, hi) = measure.support();
    if hi < 1.0 - LOCATION_TOL {
        return Ok(Recurrence::Transient);
    }
    match measure.ac.right {
        Exponent::InverseSqrt => Ok(Recurrence::NullRecurrent),
        Exponent::SqrtVanishing => Ok(Recurrence::Transient),
        Exponent::Regular => Err(ZwalkError::UnclassifiableEndpoint),
    }
}

/// Closed-form `M₋₁` of the constant walk (requires `σ₋ > 0`).
pub fn constant_inverse_moment(a: f64, b: f64, c: f64) -> Result<Mat2> {
    let (lo, hi) = sigmas(a, c);
    if lo <= 0.0 {
        return Err(ZwalkError::DivergentMoment(format!("sigma_- = {lo} is not positive")));
    }
    let r = (lo * hi).sqrt();
    Ok(sym(1.0 / r, (1.0 - b / r) / (2.0 * c), a / (c * r)))
}

/// Closed-form `M₋₁` of the force walk for `b ≠ 1/2`, with the γ case split.
pub fn force_inverse_moment(a: f64, c: f64) -> Result<Mat2> {
    let b = 1.0 - a - c;
    let (lo, hi) = sigmas(a, c);
    if lo <= 0.0 {
        return Err(ZwalkError::DivergentMoment(format!("sigma_- = {lo} is not positive")));
    }
    if (2.0 * b - 1.0).abs() <= LOCATION_TOL {
        return Err(ZwalkError::DivergentMoment("b = 1/2 puts an atom at 0".into()));
    }
    let mu = ((a + c) * (lo * hi).sqrt() - b * (a - c).abs()) / (2.0 * c * (2.0 * b - 1.0));
    let gamma = if c <= a { 1.0 } else { a / c };
    let mut m = sym(mu, (gamma - b * mu) / (a + c), mu);
    if c > a {
        m += sym(b, -(a + c), b) * ((c - a) / (c * (2.0 * b - 1.0)));
    }
    Ok(m)
}

/// Quadratic-over-`x` expansion `(Ã + B̃x + C̃x²)/(πx√((x−σ₋)(σ₊−x))) + M̃δ₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Expansion {
    pub lo: f64,
    pub hi: f64,
    pub a: Mat2,
    pub b: Mat2,
    pub c: Mat2,
    pub atom: Mat2,
}

impl Expansion {
    pub fn density(&self, x: f64) -> Mat2 {
        if x <= self.lo || x >= self.hi {
            return Mat2::zeros();
        }
        (self.a + self.b * x + self.c * (x * x)) / (PI * x * ((x - self.lo) * (self.hi - x)).sqrt())
    }

    pub fn measure(&self) -> MatrixMeasure {
        let e = *self;
        let regular: Density = Arc::new(move |x| (e.a + e.b * x + e.c * (x * x)) / (PI * x));
        MatrixMeasure {
            ac: AcPart { lo: e.lo, hi: e.hi, left: Exponent::InverseSqrt, right: Exponent::InverseSqrt, regular },
            atoms: vec![Atom::plain(0.0, e.atom)],
            tag: None,
        }
    }
}

fn constant_params(spec: &WalkSpec) -> Result<(f64, f64, f64)> {
    match *spec {
        WalkSpec::Constant { a, b, c } => Ok((a, b, c)),
        _ => Err(ZwalkError::PreconditionViolated("closed-form expansion needs a constant walk".into())),
    }
}

/// Closed-form spectral matrix of the UL Darboux transform of a constant walk.
pub fn expansion_ul(spec: &WalkSpec, f: &ULFactors) -> Result<Expansion> {
    let (a, b, c) = constant_params(spec)?;
    let lim = contfrac::limits(spec, contfrac::DEFAULT_TOL, contfrac::DEFAULT_MAX_DEPTH)?;
    let (h, hp) = (lim.h, lim.h_prime);
    let (lo, hi) = sigmas(a, c);
    let (y0, s0, xm, ym) = (f.y(0), f.s(0), f.x(-1), f.y(-1));
    let q = xm / ym;
    let v = sym(1.0, -q, q * q);
    let off = -b * y0 / (2.0 * c * ym);
    Ok(Expansion {
        lo,
        hi,
        a: v * ((hp - y0) * (h - y0) / (s0 * y0)),
        b: sym(1.0, off, (y0 * b - c * (1.0 - c)) * xm * xm / (a * c * ym * ym)),
        c: sym(0.0, 1.0, 0.0) * (y0 / (2.0 * c * ym)),
        atom: v * ((y0 - hp) * (h - y0) / (s0 * y0 * (lo * hi).sqrt())),
    })
}

/// Closed-form spectral matrix of the LU Darboux transform of a constant walk.
///
/// Every term carries the factor `â₋₁/ĉ₀ = x̃₋₁s̃₀/(ỹ₀r̃₀)`; the measure is then
/// normalized like any spectral matrix, `∫ψ̂₁₁ = 1`.
pub fn expansion_lu(spec: &WalkSpec, f: &LUFactors) -> Result<Expansion> {
    let (a, b, c) = constant_params(spec)?;
    let lim = contfrac::limits(spec, contfrac::DEFAULT_TOL, contfrac::DEFAULT_MAX_DEPTH)?;
    let (h, hp) = (lim.h, lim.h_prime);
    let (lo, hi) = sigmas(a, c);
    let (r0, s0, y0, xm) = (f.r(0), f.s(0), f.y(0), f.x(-1));
    let k = xm * s0 / (y0 * r0);
    let q = s0 / r0;
    let v = sym(1.0, -q, q * q);
    Ok(Expansion {
        lo,
        hi,
        a: v * (k * r0 * (hp - r0) * (h - r0) / (xm * s0 * s0)),
        b: sym(1.0, -b / (2.0 * y0 * r0), s0 * xm / (y0 * r0)) * (k * r0 * y0 / (xm * s0)),
        c: sym(0.0, 1.0, 0.0) * (k / (2.0 * s0 * xm)),
        atom: v * (k * r0 * (r0 - hp) * (h - r0) / (s0 * s0 * xm * (lo * hi).sqrt())),
    })
}

/// Closed form of the UL Darboux spectrum of the force walk with `b = 1/2` at
/// `y₀ = 1 − 2a`: `(B̃ + C̃x)·√((x−σ₋)(σ₊−x))/(2πc·x(1−x))` plus the jump `M̃₁` at 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HalfForceExpansion {
    pub a: f64,
    pub c: f64,
    pub lo: f64,
    pub hi: f64,
    pub b: Mat2,
    pub c_term: Mat2,
    pub jump: Mat2,
}

impl HalfForceExpansion {
    pub fn density(&self, x: f64) -> Mat2 {
        if x <= self.lo || x >= self.hi {
            return Mat2::zeros();
        }
        let w = ((x - self.lo) * (self.hi - x)).sqrt();
        (self.b + self.c_term * x) * (w / (2.0 * PI * self.c * x * (1.0 - x)))
    }
}

pub fn half_force_expansion(a: f64) -> Result<HalfForceExpansion> {
    if !(a > 0.0 && a < 0.25) {
        return Err(ZwalkError::OutOfRange { param: a, lo: 0.0, hi: 0.25 });
    }
    let c = 0.5 - a;
    let (lo, hi) = sigmas(a, c);
    let e = 1.0 - 2.0 * a;
    let g = e / (2.0 * a);
    let jump_scale = 1.0 - 4.0 * a;
    Ok(HalfForceExpansion {
        a,
        c,
        lo,
        hi,
        b: sym(1.0, -g, g * g) * e,
        c_term: sym(0.0, 1.0, -(1.0 - 4.0 * a) / (2.0 * a)) * g,
        jump: Mat2::from_element(jump_scale),
    })
}

/// Largest entrywise gap between two densities over `points` interior grid points.
pub fn grid_distance(lo: f64, hi: f64, points: usize, f: impl Fn(f64) -> Mat2, g: impl Fn(f64) -> Mat2) -> f64 {
    (1..=points)
        .map(|k| {
            let x = lo + (hi - lo) * k as f64 / (points + 1) as f64;
            (f(x) - g(x)).abs().max()
        })
        .fold(0.0, f64::max)
}

/// Smallest eigenvalue of a symmetric 2×2 matrix.
pub fn min_eigenvalue(m: &Mat2) -> f64 {
    let (p, q, r) = (m[(0, 0)], 0.5 * (m[(0, 1)] + m[(1, 0)]), m[(1, 1)]);
    let mean = 0.5 * (p + r);
    mean - (0.25 * (p - r).powi(2) + q * q).sqrt()
}
