//! Discrete Darboux transformations: multiply the stochastic factors back in
//! reversed order.

use serde::Serialize;

use crate::error::Result;
use crate::factorization::{Factors, LUFactors, Order, ULFactors};
use crate::walk::{Coeff, WalkSpec};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DarbouxWalk {
    /// Table walk on the factor window shrunk by one on each side.
    pub spec: WalkSpec,
    pub source: WalkSpec,
    pub order: Order,
    pub param: f64,
    pub factors: Factors,
}

impl DarbouxWalk {
    pub fn window(&self) -> (i64, i64) {
        self.spec.window().expect("darboux walks are tables")
    }

    pub fn coeff(&self, n: i64) -> Result<Coeff> {
        self.spec.coeff(n)
    }
}

fn table_from(lo: i64, hi: i64, f: impl Fn(i64) -> Coeff) -> Result<WalkSpec> {
    let (mut a, mut b, mut c) = (Vec::new(), Vec::new(), Vec::new());
    for n in lo..=hi {
        let q = f(n);
        a.push(q.a);
        b.push(q.b);
        c.push(q.c);
    }
    WalkSpec::table(lo, a, b, c)
}

/// `P̃ = P_L P_U`: `ãₙ = sₙxₙ`, `b̃ₙ = rₙxₙ₋₁ + sₙyₙ`, `c̃ₙ = rₙyₙ₋₁`.
pub fn darboux_ul(source: &WalkSpec, f: &ULFactors) -> Result<DarbouxWalk> {
    let spec = table_from(f.lo + 1, f.hi - 1, |n| Coeff {
        a: f.s(n) * f.x(n),
        b: f.r(n) * f.x(n - 1) + f.s(n) * f.y(n),
        c: f.r(n) * f.y(n - 1),
    })?;
    Ok(DarbouxWalk { spec, source: source.clone(), order: Order::Ul, param: f.param, factors: Factors::Ul(f.clone()) })
}

/// `P̂ = P̃_U P̃_L`: `âₙ = x̃ₙs̃ₙ₊₁`, `b̂ₙ = x̃ₙr̃ₙ₊₁ + ỹₙs̃ₙ`, `ĉₙ = ỹₙr̃ₙ`.
pub fn darboux_lu(source: &WalkSpec, f: &LUFactors) -> Result<DarbouxWalk> {
    let spec = table_from(f.lo + 1, f.hi - 1, |n| Coeff {
        a: f.x(n) * f.s(n + 1),
        b: f.x(n) * f.r(n + 1) + f.y(n) * f.s(n),
        c: f.y(n) * f.r(n),
    })?;
    Ok(DarbouxWalk { spec, source: source.clone(), order: Order::Lu, param: f.param, factors: Factors::Lu(f.clone()) })
}

pub fn darboux(source: &WalkSpec, factors: &Factors) -> Result<DarbouxWalk> {
    match factors {
        Factors::Ul(f) => darboux_ul(source, f),
        Factors::Lu(f) => darboux_lu(source, f),
    }
}
