//! Exact scalar arithmetic over the ring Q(roots of unity)[pi, 1/pi].
//!
//! Values of every analytically integrated quantity in this crate live in
//! this ring, so equality checks are decidable and results can be reported
//! without float noise. Canonical forms make structural equality semantic
//! equality.

mod cyclotomic;
mod scalar;

pub use cyclotomic::CyclotomicNumber;
pub use scalar::ExactScalar;

pub type Int = num_bigint::BigInt;
pub type Rational = num_rational::BigRational;

/// Largest root-of-unity order the canonicalizer will work with. Orders grow
/// by lcm under arithmetic, so mixed small denominators can exceed this.
pub const MAX_ORDER: u64 = 1_000_000;

/// Digits of float-embedding accuracy guaranteed by f64 evaluation.
pub const MAX_DIGITS: usize = 15;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExactError {
    #[error("root-of-unity order {0} exceeds the degree guard")]
    DegreeGuard(u64),
    #[error("division by a non-invertible scalar")]
    NonInvertible,
    #[error("cannot certify {digits} digits: error bound 1e{bound_log10:.1}")]
    PrecisionOverflow { digits: u32, bound_log10: f64 },
}

/// Parse "p/q" or "p" into an exact rational.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((num, den)) => {
            let n: Int = num.trim().parse().ok()?;
            let d: Int = den.trim().parse().ok()?;
            if d == Int::from(0) {
                return None;
            }
            Some(Rational::new(n, d))
        }
        None => {
            let n: Int = s.parse().ok()?;
            Some(Rational::from_integer(n))
        }
    }
}

/// Render a rational as "p/q", or "p" when the denominator is 1.
pub fn rational_string(r: &Rational) -> String {
    if num_traits::One::is_one(r.denom()) {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub(crate) fn rat_i64(n: i64, d: i64) -> Rational {
    Rational::new(Int::from(n), Int::from(d))
}

pub(crate) fn rat_int(n: i64) -> Rational {
    Rational::from_integer(Int::from(n))
}
