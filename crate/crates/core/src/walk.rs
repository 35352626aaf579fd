//! Nearest-neighbour random walks on ℤ given by their coefficient sequences.
//!
//! State `n` moves up with probability `aₙ`, stays with `bₙ` and moves down
//! with `cₙ`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ZwalkError};

/// Row sums must hit 1 to this tolerance at construction.
pub const STOCHASTIC_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coeff {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WalkSpec {
    Constant { a: f64, b: f64, c: f64 },
    /// `a`, `c` on the nonnegative states, swapped on the negative ones.
    Force { a: f64, c: f64 },
    /// Explicit coefficients on `window[0]..=window[1]`.
    Table { window: [i64; 2], a: Vec<f64>, b: Vec<f64>, c: Vec<f64> },
}

fn check_triple(n: i64, a: f64, b: f64, c: f64) -> Result<()> {
    let finite = a.is_finite() && b.is_finite() && c.is_finite();
    if !finite || a <= 0.0 || a >= 1.0 || c <= 0.0 || c >= 1.0 || b < 0.0 {
        return Err(ZwalkError::InvalidSpec(format!(
            "coefficients at {n} must satisfy 0<a<1, 0<c<1, b>=0; got ({a}, {b}, {c})"
        )));
    }
    if (a + b + c - 1.0).abs() > STOCHASTIC_TOL {
        return Err(ZwalkError::InvalidSpec(format!(
            "row {n} sums to {} instead of 1",
            a + b + c
        )));
    }
    Ok(())
}

impl WalkSpec {
    pub fn constant(a: f64, b: f64, c: f64) -> Result<Self> {
        let s = WalkSpec::Constant { a, b, c };
        s.validate()?;
        Ok(s)
    }

    pub fn force(a: f64, c: f64) -> Result<Self> {
        let s = WalkSpec::Force { a, c };
        s.validate()?;
        Ok(s)
    }

    /// Table walk whose first entries sit at index `lo`.
    pub fn table(lo: i64, a: Vec<f64>, b: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        if a.is_empty() {
            return Err(ZwalkError::InvalidSpec("empty table".into()));
        }
        let hi = lo + a.len() as i64 - 1;
        let s = WalkSpec::Table { window: [lo, hi], a, b, c };
        s.validate()?;
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: WalkSpec =
            serde_json::from_str(text).map_err(|e| ZwalkError::InvalidSpec(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            WalkSpec::Constant { a, b, c } => check_triple(0, *a, *b, *c),
            WalkSpec::Force { a, c } => {
                let b = 1.0 - a - c;
                if b < -STOCHASTIC_TOL {
                    return Err(ZwalkError::InvalidSpec(format!(
                        "force walk needs a + c <= 1, got b = {b}"
                    )));
                }
                check_triple(0, *a, b.max(0.0), *c)
            }
            WalkSpec::Table { window, a, b, c } => {
                let len = window[1] - window[0] + 1;
                if len < 1 {
                    return Err(ZwalkError::InvalidSpec("table window is empty".into()));
                }
                let len = len as usize;
                if a.len() != len || b.len() != len || c.len() != len {
                    return Err(ZwalkError::InvalidSpec(format!(
                        "table window holds {len} states but sequences have lengths {}, {}, {}",
                        a.len(),
                        b.len(),
                        c.len()
                    )));
                }
                for k in 0..len {
                    check_triple(window[0] + k as i64, a[k], b[k], c[k])?;
                }
                Ok(())
            }
        }
    }

    /// `None` for the infinite named families.
    pub fn window(&self) -> Option<(i64, i64)> {
        match self {
            WalkSpec::Table { window, .. } => Some((window[0], window[1])),
            _ => None,
        }
    }

    pub fn covers(&self, lo: i64, hi: i64) -> bool {
        match self.window() {
            None => true,
            Some((wlo, whi)) => wlo <= lo && hi <= whi,
        }
    }

    pub fn require(&self, lo: i64, hi: i64) -> Result<()> {
        match self.window() {
            Some((wlo, whi)) if !(wlo <= lo && hi <= whi) => Err(ZwalkError::WindowTooSmall {
                need_lo: lo,
                need_hi: hi,
                lo: wlo,
                hi: whi,
            }),
            _ => Ok(()),
        }
    }

    pub fn coeff(&self, n: i64) -> Result<Coeff> {
        match self {
            WalkSpec::Constant { a, b, c } => Ok(Coeff { a: *a, b: *b, c: *c }),
            WalkSpec::Force { a, c } => {
                let b = (1.0 - a - c).max(0.0);
                if n >= 0 {
                    Ok(Coeff { a: *a, b, c: *c })
                } else {
                    Ok(Coeff { a: *c, b, c: *a })
                }
            }
            WalkSpec::Table { window, a, b, c } => {
                if n < window[0] || n > window[1] {
                    return Err(ZwalkError::IndexOutOfWindow { n, lo: window[0], hi: window[1] });
                }
                let k = (n - window[0]) as usize;
                Ok(Coeff { a: a[k], b: b[k], c: c[k] })
            }
        }
    }

    /// Finite section on `[-n, n]`; transitions leaving the window are dropped.
    pub fn truncate(&self, n: i64) -> Result<TruncatedMatrix> {
        if n < 1 {
            return Err(ZwalkError::InvalidSpec(format!("truncation size must be >= 1, got {n}")));
        }
        self.truncate_range(-n, n)
    }

    pub fn truncate_range(&self, lo: i64, hi: i64) -> Result<TruncatedMatrix> {
        let size = (hi - lo + 1) as usize;
        let mut m = DMatrix::zeros(size, size);
        for k in 0..size {
            let q = self.coeff(lo + k as i64)?;
            m[(k, k)] = q.b;
            if k + 1 < size {
                m[(k, k + 1)] = q.a;
            }
            if k > 0 {
                m[(k, k - 1)] = q.c;
            }
        }
        Ok(TruncatedMatrix { lo, hi, matrix: m })
    }
}

/// Dense finite section of the transition matrix, rows and columns labelled by state.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedMatrix {
    pub lo: i64,
    pub hi: i64,
    pub matrix: DMatrix<f64>,
}

impl TruncatedMatrix {
    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn contains(&self, n: i64) -> bool {
        self.lo <= n && n <= self.hi
    }

    /// Entry at states `(i, j)`; zero outside the window.
    pub fn entry(&self, i: i64, j: i64) -> f64 {
        if !self.contains(i) || !self.contains(j) {
            return 0.0;
        }
        self.matrix[((i - self.lo) as usize, (j - self.lo) as usize)]
    }

    pub fn row_sum(&self, i: i64) -> f64 {
        self.matrix.row((i - self.lo) as usize).sum()
    }

    /// Mass lost by row `i` through the truncation.
    pub fn defect(&self, i: i64) -> f64 {
        1.0 - self.row_sum(i)
    }
}
