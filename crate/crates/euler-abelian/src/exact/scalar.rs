//! Exact scalars: Laurent polynomials in pi with cyclotomic coefficients.

use super::cyclotomic::CyclotomicNumber;
use super::{parse_rational, rational_string, ExactError, Rational, MAX_DIGITS};
use num_traits::{Signed, ToPrimitive, Zero};
use serde_json::{json, Value};
use std::collections::BTreeMap;

/// sum_k c_k pi^k with cyclotomic c_k; exact under +, -, *, and division by
/// single-term values.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExactScalar {
    terms: BTreeMap<i64, CyclotomicNumber>,
}

impl ExactScalar {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::from_cyclotomic(CyclotomicNumber::one())
    }

    pub fn from_rational(c: Rational) -> Self {
        Self::from_cyclotomic(CyclotomicNumber::from_rational(c))
    }

    pub fn from_cyclotomic(c: CyclotomicNumber) -> Self {
        Self::pi_term(0, c)
    }

    /// c * pi^k as a one-term scalar.
    pub fn pi_term(k: i64, c: CyclotomicNumber) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(k, c);
        }
        Self { terms }
    }

    pub fn root_of_unity(r: &Rational) -> Result<Self, ExactError> {
        Ok(Self::from_cyclotomic(CyclotomicNumber::root_of_unity(r)?))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1
            && self.terms.get(&0).map(|c| c.is_one()).unwrap_or(false)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&i64, &CyclotomicNumber)> {
        self.terms.iter()
    }

    /// The rational value, if the scalar is a plain rational (pi-power 0).
    pub fn as_rational(&self) -> Option<Rational> {
        if self.is_zero() {
            return Some(Rational::zero());
        }
        if self.terms.len() == 1 {
            if let Some(c) = self.terms.get(&0) {
                return c.as_rational();
            }
        }
        None
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, ExactError> {
        let mut terms = self.terms.clone();
        for (k, c) in &other.terms {
            let merged = match terms.get(k) {
                Some(existing) => existing.try_add(c)?,
                None => c.clone(),
            };
            if merged.is_zero() {
                terms.remove(k);
            } else {
                terms.insert(*k, merged);
            }
        }
        Ok(Self { terms })
    }

    pub fn neg(&self) -> Self {
        let terms = self.terms.iter().map(|(k, c)| (*k, c.neg())).collect();
        Self { terms }
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self, ExactError> {
        self.try_add(&other.neg())
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self, ExactError> {
        let mut terms: BTreeMap<i64, CyclotomicNumber> = BTreeMap::new();
        for (k1, c1) in &self.terms {
            for (k2, c2) in &other.terms {
                let k = k1 + k2;
                let prod = c1.try_mul(c2)?;
                let merged = match terms.get(&k) {
                    Some(existing) => existing.try_add(&prod)?,
                    None => prod,
                };
                if merged.is_zero() {
                    terms.remove(&k);
                } else {
                    terms.insert(k, merged);
                }
            }
        }
        Ok(Self { terms })
    }

    pub fn scale(&self, c: &Rational) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        let terms = self
            .terms
            .iter()
            .map(|(k, v)| (*k, v.scale(c)))
            .collect();
        Self { terms }
    }

    /// Complex conjugate (pi is real, so only coefficients conjugate).
    pub fn conj(&self) -> Self {
        let terms = self.terms.iter().map(|(k, c)| (*k, c.conj())).collect();
        Self { terms }
    }

    /// Division is exact only by single-pi-term scalars.
    pub fn try_div(&self, other: &Self) -> Result<Self, ExactError> {
        if other.terms.len() != 1 {
            return Err(ExactError::NonInvertible);
        }
        let (k0, c0) = other.terms.iter().next().expect("len checked");
        let inv = c0.try_inv()?;
        let mut terms = BTreeMap::new();
        for (k, c) in &self.terms {
            let q = c.try_mul(&inv)?;
            if !q.is_zero() {
                terms.insert(k - k0, q);
            }
        }
        Ok(Self { terms })
    }

    pub fn try_pow(&self, p: u32) -> Result<Self, ExactError> {
        let mut out = Self::one();
        for _ in 0..p {
            out = out.try_mul(self)?;
        }
        Ok(out)
    }

    /// Complex float embedding, accurate to 10^{-digits+2}; errs when the
    /// accumulated magnitude bound cannot support the request.
    pub fn to_complex(&self, digits: u32) -> Result<(f64, f64), ExactError> {
        if digits as usize > MAX_DIGITS {
            return Err(ExactError::PrecisionOverflow {
                digits,
                bound_log10: MAX_DIGITS as f64,
            });
        }
        let mut re = 0.0;
        let mut im = 0.0;
        let mut mag = 0.0f64;
        for (k, c) in &self.terms {
            let (cre, cim, cmag) = c.embed().ok_or(ExactError::PrecisionOverflow {
                digits,
                bound_log10: f64::INFINITY,
            })?;
            let p = std::f64::consts::PI.powi(
                (*k).to_i32().ok_or(ExactError::PrecisionOverflow {
                    digits,
                    bound_log10: f64::INFINITY,
                })?,
            );
            re += cre * p;
            im += cim * p;
            mag += cmag * p.abs();
        }
        // f64 relative error ~1e-16 per operation; demand headroom.
        let bound = mag * 1e-14;
        if bound > 10f64.powi(2 - digits as i32) {
            return Err(ExactError::PrecisionOverflow {
                digits,
                bound_log10: bound.log10(),
            });
        }
        Ok((re, im))
    }

    /// JSON: list of [pi_power, cyclotomic], cyclotomic = list of [r, "p/q"].
    pub fn to_json(&self) -> Value {
        let items: Vec<Value> = self
            .terms
            .iter()
            .map(|(k, c)| {
                let cy: Vec<Value> = c
                    .terms()
                    .map(|(r, v)| json!([rational_string(r), rational_string(v)]))
                    .collect();
                json!([k, cy])
            })
            .collect();
        Value::Array(items)
    }

    pub fn from_json(v: &Value) -> Option<Self> {
        let arr = v.as_array()?;
        let mut out = Self::zero();
        for item in arr {
            let pair = item.as_array()?;
            if pair.len() != 2 {
                return None;
            }
            let k = pair[0].as_i64()?;
            let mut cy = CyclotomicNumber::zero();
            for t in pair[1].as_array()? {
                let t = t.as_array()?;
                if t.len() != 2 {
                    return None;
                }
                let r = parse_rational(t[0].as_str()?)?;
                let c = parse_rational(t[1].as_str()?)?;
                let root = CyclotomicNumber::root_of_unity(&r).ok()?;
                cy = cy.try_add(&root.scale(&c)).ok()?;
            }
            out = out.try_add(&Self::pi_term(k, cy)).ok()?;
        }
        Some(out)
    }

    /// Human-readable exact form, e.g. "1/3 + (-1/2)*pi^2".
    pub fn display_string(&self) -> String {
        if self.is_zero() {
            return "0".into();
        }
        let mut parts = Vec::new();
        for (k, c) in &self.terms {
            let coeff = cyclotomic_string(c);
            let part = match k {
                0 => coeff,
                1 => format!("({coeff})*pi"),
                _ => format!("({coeff})*pi^{k}"),
            };
            parts.push(part);
        }
        parts.join(" + ")
    }
}

fn cyclotomic_string(c: &CyclotomicNumber) -> String {
    if c.is_zero() {
        return "0".into();
    }
    if let Some(q) = c.as_rational() {
        return rational_string(&q);
    }
    let mut parts = Vec::new();
    for (r, v) in c.terms() {
        if r.is_zero() {
            parts.push(rational_string(v));
        } else if v.abs() == Rational::from_integer(1.into()) {
            let sign = if v.is_negative() { "-" } else { "" };
            parts.push(format!("{sign}zeta({})", rational_string(r)));
        } else {
            parts.push(format!("{}*zeta({})", rational_string(v), rational_string(r)));
        }
    }
    parts.join(" + ")
}

#[cfg(test)]
mod tests {
    use super::super::{rat_i64, rat_int};
    use super::*;

    fn zeta(n: i64, d: i64) -> ExactScalar {
        ExactScalar::root_of_unity(&rat_i64(n, d)).unwrap()
    }

    #[test]
    fn ring_ops() {
        let a = ExactScalar::pi_term(2, CyclotomicNumber::from_rational(rat_i64(1, 3)));
        let b = ExactScalar::pi_term(-1, CyclotomicNumber::from_rational(rat_int(2)));
        let p = a.try_mul(&b).unwrap();
        // (1/3) pi^2 * 2 pi^-1 = (2/3) pi
        assert_eq!(
            p,
            ExactScalar::pi_term(1, CyclotomicNumber::from_rational(rat_i64(2, 3)))
        );
        let s = a.try_add(&a).unwrap().try_sub(&a).unwrap();
        assert_eq!(s, a);
    }

    #[test]
    fn phase_sum_collapses_to_real() {
        // (zeta(1/3)+zeta(2/3)) * pi^2 = -pi^2
        let z = zeta(1, 3).try_add(&zeta(2, 3)).unwrap();
        let v = z
            .try_mul(&ExactScalar::pi_term(2, CyclotomicNumber::one()))
            .unwrap();
        let (re, im) = v.to_complex(10).unwrap();
        assert!((re + 9.869604401089358).abs() < 1e-9);
        assert!(im.abs() < 1e-12);
        assert_eq!(
            v,
            ExactScalar::pi_term(2, CyclotomicNumber::from_rational(rat_int(-1)))
        );
    }

    #[test]
    fn division_by_pi_term() {
        let a = ExactScalar::pi_term(3, CyclotomicNumber::from_rational(rat_i64(5, 2)));
        let b = ExactScalar::pi_term(1, CyclotomicNumber::from_rational(rat_int(5)));
        let q = a.try_div(&b).unwrap();
        assert_eq!(
            q,
            ExactScalar::pi_term(2, CyclotomicNumber::from_rational(rat_i64(1, 2)))
        );
        // division by a two-term scalar is refused
        let two_terms = a.try_add(&b).unwrap();
        assert!(matches!(a.try_div(&two_terms), Err(ExactError::NonInvertible)));
        assert!(matches!(
            a.try_div(&ExactScalar::zero()),
            Err(ExactError::NonInvertible)
        ));
    }

    #[test]
    fn to_complex_is_ring_hom() {
        let a = zeta(1, 8)
            .try_mul(&ExactScalar::pi_term(1, CyclotomicNumber::from_rational(rat_i64(3, 7))))
            .unwrap();
        let b = zeta(5, 12).try_add(&ExactScalar::from_rational(rat_i64(-2, 3))).unwrap();
        let digits = 10;
        let (ar, ai) = a.to_complex(digits).unwrap();
        let (br, bi) = b.to_complex(digits).unwrap();
        let (pr, pi_) = a.try_mul(&b).unwrap().to_complex(digits).unwrap();
        let tol = 10f64.powi(-(digits as i32) + 2);
        assert!((pr - (ar * br - ai * bi)).abs() < tol);
        assert!((pi_ - (ar * bi + ai * br)).abs() < tol);
        let (sr, si) = a.try_add(&b).unwrap().to_complex(digits).unwrap();
        assert!((sr - (ar + br)).abs() < tol);
        assert!((si - (ai + bi)).abs() < tol);
    }

    #[test]
    fn precision_overflow_on_excess_digits() {
        let a = ExactScalar::one();
        assert!(a.to_complex(15).is_ok());
        assert!(matches!(
            a.to_complex(16),
            Err(ExactError::PrecisionOverflow { .. })
        ));
    }

    #[test]
    fn json_round_trip() {
        let v = zeta(1, 6)
            .try_mul(&ExactScalar::pi_term(-2, CyclotomicNumber::from_rational(rat_i64(7, 4))))
            .unwrap()
            .try_add(&ExactScalar::from_rational(rat_i64(-1, 3)))
            .unwrap();
        let j = v.to_json();
        let back = ExactScalar::from_json(&j).unwrap();
        assert_eq!(v, back);
        let s = serde_json::to_string(&j).unwrap();
        let parsed: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(ExactScalar::from_json(&parsed).unwrap(), v);
    }
}
