//! Random walks on ℤ: stochastic UL/LU factorizations bounded by continued
//! fractions, discrete Darboux transformations, their 2×2 spectral matrices and
//! Karlin–McGregor verification of n-step probabilities.

pub mod contfrac;
pub mod darboux;
pub mod error;
pub mod factorization;
pub mod kmcg;
pub mod polynomials;
pub mod scalar;
pub mod spectral;
pub mod walk;

pub use contfrac::{convergents, limits, ConvergentPair, FractionLimits};
pub use darboux::{darboux, darboux_lu, darboux_ul, DarbouxWalk};
pub use error::{Result, ZwalkError};
pub use factorization::{assemble_product, factor_lu, factor_ul, factorize, Factors, LUFactors, Order, ULFactors};
pub use kmcg::{
    km_probability, oracle_power, orthogonality_suite, simulate, verify, OrthogonalityReport, SimulationReport,
    VerificationReport,
};
pub use polynomials::{build_q, build_s, build_t, conjugate_family, potentials, FamilyTag, Poly, PolynomialFamily, PotentialCoefficients};
pub use spectral::{
    classify_recurrence, conjugate, darboux_spectrum, example_spectrum, geronimus_lu, geronimus_ul, moment, pair, Atom,
    AtomOrder, Exponent, Frame, Mat2, MatrixMeasure, Moment, Recurrence,
};
pub use walk::{Coeff, TruncatedMatrix, WalkSpec};
