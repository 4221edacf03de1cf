//! The abelian side: admissible Laurent data on a box times a torus, the
//! tilde transform from finite-type functions, exact moment integrals, the
//! measure-substitution Jacobian, spectra, and the exact convex-hull test
//! behind the moment-vanishing probe.
//!
//! The torus substitution rescales each circle angle to a full period
//! (leading angles and diagonal phases pick up their winding divisors), so a
//! circle exponent k on a divisor-d coordinate becomes the rational
//! z-exponent k/d. Compact angles substitute to x = sin(psi) on [0,1] for the
//! unitary family and x = cos(phi) on [-1,1] for the orthogonal one.

mod simplex;

use crate::euler::{CoordKind, CoordRole, EulerAngles, Group};
use crate::exact::{
    parse_rational, rat_i64, rational_string, CyclotomicNumber, ExactError, ExactScalar, Rational,
};
use crate::finite_type::{coord_split, reduce_compact, FiniteTypeError, FiniteTypeFunction, TERM_GUARD};
use crate::haar::{self, HaarError};
use num_complex::Complex64;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde_json::{json, Value};
use simplex::Feasibility;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AbelianError {
    #[error("operands live on different groups or ranks")]
    Mismatch,
    #[error("term count {0} exceeds the expansion guard")]
    TermGuard(usize),
    #[error("moment power must be positive")]
    ZeroPower,
    #[error("spectrum is empty")]
    EmptySpectrum,
    #[error("certificate failed re-verification")]
    CertificateFailure,
    #[error("malformed input: {0}")]
    Parse(String),
    #[error("not admissible: {0}")]
    NotAdmissible(String),
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error(transparent)]
    FiniteType(#[from] FiniteTypeError),
    #[error(transparent)]
    Haar(#[from] HaarError),
}

/// Polynomial in the x-variables and their square-root companions
/// sqrt(1-x^2), with exact coefficients. Keys are (x-power, sqrt-power) per
/// variable; canonical form keeps every sqrt-power in {0,1}.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct XPolynomial {
    terms: BTreeMap<Vec<(u32, u32)>, ExactScalar>,
}

impl XPolynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(x_vars: usize, c: ExactScalar) -> Self {
        let mut p = Self::zero();
        if !c.is_zero() {
            p.terms.insert(vec![(0, 0); x_vars], c);
        }
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<(u32, u32)>, &ExactScalar)> {
        self.terms.iter()
    }

    /// Merge a (possibly non-canonical) monomial into the polynomial.
    fn insert_reduced(
        &mut self,
        powers: &[(u32, u32)],
        coeff: &ExactScalar,
    ) -> Result<(), AbelianError> {
        for (pw, c) in reduce_compact(powers, coeff)? {
            let merged = match self.terms.get(&pw) {
                Some(e) => e.try_add(&c)?,
                None => c,
            };
            if merged.is_zero() {
                self.terms.remove(&pw);
            } else {
                self.terms.insert(pw, merged);
            }
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, AbelianError> {
        let mut out = self.clone();
        for (pw, c) in &other.terms {
            out.insert_reduced(pw, c)?;
        }
        Ok(out)
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self, AbelianError> {
        let mut out = Self::zero();
        for (p1, c1) in &self.terms {
            for (p2, c2) in &other.terms {
                let pw: Vec<(u32, u32)> = p1
                    .iter()
                    .zip(p2)
                    .map(|(a, b)| (a.0 + b.0, a.1 + b.1))
                    .collect();
                out.insert_reduced(&pw, &c1.try_mul(c2)?)?;
                if out.terms.len() > TERM_GUARD {
                    return Err(AbelianError::TermGuard(out.terms.len()));
                }
            }
        }
        Ok(out)
    }

    pub fn try_scale(&self, c: &ExactScalar) -> Result<Self, AbelianError> {
        let mut out = Self::zero();
        for (pw, v) in &self.terms {
            let s = v.try_mul(c)?;
            if !s.is_zero() {
                out.terms.insert(pw.clone(), s);
            }
        }
        Ok(out)
    }

    pub fn eval(&self, xs: &[f64]) -> Complex64 {
        let mut total = Complex64::new(0.0, 0.0);
        for (pw, c) in &self.terms {
            let (re, im) = c.to_complex(12).expect("coefficients stay in f64 range");
            let mut v = Complex64::new(re, im);
            for (&(f, b), x) in pw.iter().zip(xs) {
                v *= x.powi(f as i32) * (1.0 - x * x).max(0.0).sqrt().powi(b as i32);
            }
            total += v;
        }
        total
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.terms
                .iter()
                .map(|(pw, c)| {
                    json!({
                        "powers": pw.iter().map(|&(f, b)| json!([f, b])).collect::<Vec<_>>(),
                        "coeff": c.to_json(),
                    })
                })
                .collect(),
        )
    }

    fn from_json(v: &Value, x_vars: usize) -> Result<Self, AbelianError> {
        let arr = v
            .as_array()
            .ok_or_else(|| AbelianError::Parse("coefficient polynomial must be a list".into()))?;
        let mut out = Self::zero();
        for item in arr {
            let pws = item
                .get("powers")
                .and_then(Value::as_array)
                .ok_or_else(|| AbelianError::Parse("missing powers".into()))?;
            let powers: Vec<(u32, u32)> = pws
                .iter()
                .map(|p| {
                    let pair = p.as_array()?;
                    Some((
                        pair.first()?.as_u64()? as u32,
                        pair.get(1)?.as_u64()? as u32,
                    ))
                })
                .collect::<Option<_>>()
                .ok_or_else(|| AbelianError::Parse("bad power pair".into()))?;
            if powers.len() != x_vars {
                return Err(AbelianError::Parse(format!(
                    "power vector length {} does not match {} x-variables",
                    powers.len(),
                    x_vars
                )));
            }
            let coeff = item
                .get("coeff")
                .and_then(ExactScalar::from_json)
                .ok_or_else(|| AbelianError::Parse("bad coefficient".into()))?;
            out.insert_reduced(&powers, &coeff)?;
        }
        Ok(out)
    }
}

/// Laurent-type function on box x torus: a finite sum of rational-exponent
/// torus monomials with x-polynomial coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibleFunction {
    pub group: Group,
    pub n: usize,
    x_vars: usize,
    z_vars: usize,
    terms: BTreeMap<Vec<Rational>, XPolynomial>,
}

impl AdmissibleFunction {
    pub fn zero(group: Group, n: usize) -> Self {
        let split = coord_split(group, n);
        Self {
            group,
            n,
            x_vars: split.compact.len(),
            z_vars: split.circle.len(),
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(group: Group, n: usize, c: ExactScalar) -> Self {
        let mut f = Self::zero(group, n);
        if !c.is_zero() {
            f.terms.insert(
                vec![Rational::zero(); f.z_vars],
                XPolynomial::constant(f.x_vars, c),
            );
        }
        f
    }

    pub fn x_vars(&self) -> usize {
        self.x_vars
    }

    pub fn z_vars(&self) -> usize {
        self.z_vars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<Rational>, &XPolynomial)> {
        self.terms.iter()
    }

    /// Total monomial count across all torus exponents.
    pub fn num_monomials(&self) -> usize {
        self.terms.values().map(XPolynomial::num_terms).sum()
    }

    fn insert(&mut self, key: Vec<Rational>, poly: XPolynomial) -> Result<(), AbelianError> {
        if poly.is_zero() {
            return Ok(());
        }
        let merged = match self.terms.get(&key) {
            Some(e) => e.try_add(&poly)?,
            None => poly,
        };
        if merged.is_zero() {
            self.terms.remove(&key);
        } else {
            self.terms.insert(key, merged);
        }
        Ok(())
    }

    fn check_compatible(&self, other: &Self) -> Result<(), AbelianError> {
        if self.group != other.group || self.n != other.n {
            return Err(AbelianError::Mismatch);
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, AbelianError> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.insert(m.clone(), c.clone())?;
        }
        Ok(out)
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self, AbelianError> {
        self.check_compatible(other)?;
        let mut out = Self::zero(self.group, self.n);
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                let key: Vec<Rational> = m1.iter().zip(m2).map(|(a, b)| a + b).collect();
                out.insert(key, c1.try_mul(c2)?)?;
                if out.num_monomials() > TERM_GUARD {
                    return Err(AbelianError::TermGuard(out.num_monomials()));
                }
            }
        }
        Ok(out)
    }

    pub fn try_pow(&self, p: u32) -> Result<Self, AbelianError> {
        let mut out = Self::constant(self.group, self.n, ExactScalar::one());
        for _ in 0..p {
            out = out.try_mul(self)?;
        }
        Ok(out)
    }

    /// Winding divisors of the torus variables, in z-variable order.
    fn divisors(&self) -> Vec<u64> {
        coord_split(self.group, self.n)
            .circle
            .iter()
            .map(|s| match s.role {
                CoordRole::Circle { divisor } => divisor,
                CoordRole::Compact => unreachable!("circle list holds circle coordinates"),
            })
            .collect()
    }

    /// Evaluate with torus angles Theta_i in [0,2pi) (z_i = e^{i Theta_i},
    /// fractional powers on the parametric branch) and x values.
    pub fn eval_torus(&self, thetas: &[f64], xs: &[f64]) -> Complex64 {
        let mut total = Complex64::new(0.0, 0.0);
        for (m, poly) in &self.terms {
            let mut phase = 0.0;
            for (q, theta) in m.iter().zip(thetas) {
                phase += q.to_f64().expect("exponents stay in f64 range") * theta;
            }
            total += Complex64::from_polar(1.0, phase) * poly.eval(xs);
        }
        total
    }

    /// Evaluate through the substitution: angles map to scaled torus angles
    /// and box values. Matches the finite-type evaluation of a preimage
    /// under the tilde transform.
    pub fn eval_angles(&self, a: &EulerAngles) -> Complex64 {
        let split = coord_split(self.group, self.n);
        let thetas: Vec<f64> = split
            .circle
            .iter()
            .map(|s| {
                let d = match s.role {
                    CoordRole::Circle { divisor } => divisor as f64,
                    CoordRole::Compact => unreachable!(),
                };
                d * angle_value(a, s.kind, s.index)
            })
            .collect();
        let xs: Vec<f64> = split
            .compact
            .iter()
            .map(|s| {
                let v = angle_value(a, s.kind, s.index);
                match self.group {
                    Group::Su => v.sin(),
                    Group::So => v.cos(),
                }
            })
            .collect();
        self.eval_torus(&thetas, &xs)
    }

    /// JSON: {"group","n","x_vars","z_vars","terms":[{"m":["p/q",...],"c":...}]}.
    pub fn to_json(&self) -> Value {
        json!({
            "group": self.group.as_str(),
            "n": self.n,
            "x_vars": self.x_vars,
            "z_vars": self.z_vars,
            "terms": self.terms.iter().map(|(m, c)| json!({
                "m": m.iter().map(|q| rational_string(q)).collect::<Vec<_>>(),
                "c": c.to_json(),
            })).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &Value) -> Result<Self, AbelianError> {
        let group = v
            .get("group")
            .and_then(Value::as_str)
            .and_then(Group::parse)
            .ok_or_else(|| AbelianError::Parse("missing or bad group".into()))?;
        let n = v
            .get("n")
            .and_then(Value::as_u64)
            .ok_or_else(|| AbelianError::Parse("missing rank".into()))? as usize;
        if n < 2 {
            return Err(AbelianError::Parse("rank must be at least 2".into()));
        }
        let mut f = Self::zero(group, n);
        for key in ["x_vars", "z_vars"] {
            let got = v
                .get(key)
                .and_then(Value::as_u64)
                .ok_or_else(|| AbelianError::Parse(format!("missing {key}")))?
                as usize;
            let want = if key == "x_vars" { f.x_vars } else { f.z_vars };
            if got != want {
                return Err(AbelianError::Parse(format!(
                    "{key} is {got}, expected {want} for {group}({n})"
                )));
            }
        }
        let terms = v
            .get("terms")
            .and_then(Value::as_array)
            .ok_or_else(|| AbelianError::Parse("missing terms".into()))?;
        for item in terms {
            let m: Vec<Rational> = item
                .get("m")
                .and_then(Value::as_array)
                .ok_or_else(|| AbelianError::Parse("missing exponent vector".into()))?
                .iter()
                .map(|x| x.as_str().and_then(parse_rational))
                .collect::<Option<_>>()
                .ok_or_else(|| AbelianError::Parse("bad exponent".into()))?;
            if m.len() != f.z_vars {
                return Err(AbelianError::Parse(format!(
                    "exponent vector length {} does not match {} z-variables",
                    m.len(),
                    f.z_vars
                )));
            }
            let poly = XPolynomial::from_json(
                item.get("c")
                    .ok_or_else(|| AbelianError::Parse("missing coefficient".into()))?,
                f.x_vars,
            )?;
            f.insert(m, poly)?;
        }
        f.validate()?;
        Ok(f)
    }

    /// Check the exponent lattice condition: denominators bounded by the rank
    /// for the unitary family, integral exponents for the orthogonal one.
    fn validate(&self) -> Result<(), AbelianError> {
        for m in self.terms.keys() {
            for q in m {
                let den = q.denom();
                let bad = match self.group {
                    Group::Su => *den > crate::exact::Int::from(self.n),
                    Group::So => !den.is_one(),
                };
                if bad {
                    return Err(AbelianError::NotAdmissible(format!(
                        "exponent {} outside the {} lattice for rank {}",
                        rational_string(q),
                        self.group,
                        self.n
                    )));
                }
            }
        }
        Ok(())
    }
}

fn angle_value(a: &EulerAngles, kind: CoordKind, index: usize) -> f64 {
    match kind {
        CoordKind::Phi => a.phi[index],
        CoordKind::Psi => a.psi[index],
        CoordKind::Omega => a.omega[index],
    }
}

/// The substitution sending a finite-type function to admissible data:
/// circle exponents divide by their coordinate's winding divisor, compact
/// sine/cosine pairs become x and sqrt(1-x^2) powers.
pub fn tilde(f: &FiniteTypeFunction) -> Result<AdmissibleFunction, AbelianError> {
    let f = f.normalize()?;
    let mut out = AdmissibleFunction::zero(f.group, f.n);
    let divisors = out.divisors();
    for (m, c) in f.terms() {
        let key: Vec<Rational> = m
            .circle
            .iter()
            .zip(&divisors)
            .map(|(k, d)| rat_i64(*k, *d as i64))
            .collect();
        let mut poly = XPolynomial::zero();
        poly.insert_reduced(&m.compact, c)?;
        out.insert(key, poly)?;
    }
    Ok(out)
}

/// The measure-substitution Jacobian: a single monomial in the x-variables
/// times the product of computed normalization constants. Integrating an
/// admissible function against it over the box times torus (with the torus
/// prefactor) reproduces the group integral.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianJ {
    pub group: Group,
    pub n: usize,
    /// Product of the per-level computed normalization constants.
    pub constant: ExactScalar,
    /// (x-power, sqrt-power) per x-variable.
    pub powers: Vec<(u32, u32)>,
}

impl JacobianJ {
    pub fn eval(&self, xs: &[f64]) -> f64 {
        let (re, _) = self.constant.to_complex(12).expect("constant is real");
        let mut v = re;
        for (&(f, b), x) in self.powers.iter().zip(xs) {
            v *= x.powi(f as i32) * (1.0 - x * x).max(0.0).sqrt().powi(b as i32);
        }
        v
    }

    pub fn to_json(&self) -> Value {
        json!({
            "group": self.group.as_str(),
            "n": self.n,
            "constant": self.constant.to_json(),
            "powers": self.powers.iter().map(|&(f, b)| json!([f, b])).collect::<Vec<_>>(),
        })
    }
}

pub fn jacobian(group: Group, n: usize) -> Result<JacobianJ, AbelianError> {
    let report = haar::normalization(group, n)?;
    let split = coord_split(group, n);
    let powers = split
        .compact
        .iter()
        .map(|s| match group {
            // density cos^{2j-1} sin (or the level-final cos sin^{2r-3})
            // against dx = cos(psi) dpsi
            Group::Su => {
                if s.pos == s.level - 2 {
                    (2 * s.level as u32 - 3, 0)
                } else {
                    (1, 2 * s.pos as u32)
                }
            }
            // density sin^pos against dx = -sin(phi) dphi
            Group::So => (0, s.pos as u32 - 1),
        })
        .collect();
    Ok(JacobianJ {
        group,
        n,
        constant: report.total_computed,
        powers,
    })
}

/// Exact full-period circle integral of e^{i q theta}: 2 pi at q = 0,
/// (e^{2 pi i q} - 1)/(i q) otherwise; zero at nonzero integers.
pub fn circle_factor(q: &Rational) -> Result<ExactScalar, ExactError> {
    if q.is_zero() {
        return Ok(ExactScalar::pi_term(
            1,
            CyclotomicNumber::from_rational(rat_i64(2, 1)),
        ));
    }
    if q.is_integer() {
        return Ok(ExactScalar::zero());
    }
    // (zeta - 1) * (-i) / q
    let zeta = ExactScalar::root_of_unity(q)?;
    let minus_i = ExactScalar::root_of_unity(&rat_i64(3, 4))?;
    Ok(zeta
        .try_sub(&ExactScalar::one())?
        .try_mul(&minus_i)?
        .scale(&q.recip()))
}

/// Exact box integral of x^f (1-x^2)^{b/2} over [0,1] (unitary family) or
/// [-1,1] (orthogonal family).
fn x_factor(group: Group, f: u32, b: u32) -> ExactScalar {
    let w = haar::wallis_exact(f as u64, b as u64 + 1);
    match group {
        Group::Su => w,
        Group::So => {
            if f % 2 == 1 {
                ExactScalar::zero()
            } else {
                w.scale(&rat_i64(2, 1))
            }
        }
    }
}

/// Group-side integral of the P-th power of (the preimage of) an admissible
/// function, computed exactly on the abelian side.
pub fn exact_moment(f: &AdmissibleFunction, p: u32) -> Result<ExactScalar, AbelianError> {
    if p == 0 {
        return Err(AbelianError::ZeroPower);
    }
    moment_of(&f.try_pow(p)?)
}

/// The abelian integral itself (no powering): sum over terms of coefficient
/// times circle factors times box factors, times the Jacobian and the torus
/// rescaling prefactor.
fn moment_of(fp: &AdmissibleFunction) -> Result<ExactScalar, AbelianError> {
    let jac = jacobian(fp.group, fp.n)?;
    let mut pref = Rational::one();
    for d in fp.divisors() {
        pref /= rat_i64(d as i64, 1);
    }
    let mut total = ExactScalar::zero();
    for (m, xpoly) in fp.terms() {
        let mut zfac = ExactScalar::one();
        for q in m {
            let th = circle_factor(q)?;
            if th.is_zero() {
                zfac = ExactScalar::zero();
                break;
            }
            zfac = zfac.try_mul(&th)?;
        }
        if zfac.is_zero() {
            continue;
        }
        for (pw, coeff) in xpoly.terms() {
            let mut xfac = ExactScalar::one();
            for (j, &(f, b)) in pw.iter().enumerate() {
                let (jf, jb) = jac.powers[j];
                let w = x_factor(fp.group, f + jf, b + jb);
                if w.is_zero() {
                    xfac = ExactScalar::zero();
                    break;
                }
                xfac = xfac.try_mul(&w)?;
            }
            if xfac.is_zero() {
                continue;
            }
            total = total.try_add(&coeff.try_mul(&zfac)?.try_mul(&xfac)?)?;
        }
    }
    Ok(total.try_mul(&jac.constant)?.scale(&pref))
}

/// The set of torus exponent vectors carrying a nonzero coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub dim: usize,
    pub points: Vec<Vec<Rational>>,
}

impl Spectrum {
    pub fn to_json(&self) -> Value {
        json!({
            "dim": self.dim,
            "points": self.points.iter().map(|p| {
                p.iter().map(|q| rational_string(q)).collect::<Vec<_>>()
            }).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &Value) -> Result<Self, AbelianError> {
        let dim = v
            .get("dim")
            .and_then(Value::as_u64)
            .ok_or_else(|| AbelianError::Parse("missing dim".into()))? as usize;
        let mut points = Vec::new();
        for p in v
            .get("points")
            .and_then(Value::as_array)
            .ok_or_else(|| AbelianError::Parse("missing points".into()))?
        {
            let pt: Vec<Rational> = p
                .as_array()
                .ok_or_else(|| AbelianError::Parse("point must be a list".into()))?
                .iter()
                .map(|x| x.as_str().and_then(parse_rational))
                .collect::<Option<_>>()
                .ok_or_else(|| AbelianError::Parse("bad point entry".into()))?;
            if pt.len() != dim {
                return Err(AbelianError::Parse(format!(
                    "point has {} entries, expected {dim}",
                    pt.len()
                )));
            }
            points.push(pt);
        }
        points.sort();
        points.dedup();
        Ok(Self { dim, points })
    }
}

pub fn spectrum(f: &AdmissibleFunction) -> Spectrum {
    Spectrum {
        dim: f.z_vars,
        points: f
            .terms
            .iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(m, _)| m.clone())
            .collect(),
    }
}

/// Outcome of the exact hull membership test, carrying a re-verifiable
/// certificate: convex coefficients for the points (inside) or a hyperplane
/// normal h with h . m > 0 for every point (outside).
#[derive(Debug, Clone, PartialEq)]
pub enum HullVerdict {
    Inside { coefficients: Vec<Rational> },
    Outside { separator: Vec<Rational> },
}

impl HullVerdict {
    pub fn contains_zero(&self) -> bool {
        matches!(self, HullVerdict::Inside { .. })
    }

    pub fn to_json(&self) -> Value {
        match self {
            HullVerdict::Inside { coefficients } => json!({
                "verdict": "inside",
                "coefficients": coefficients.iter().map(|q| rational_string(q)).collect::<Vec<_>>(),
            }),
            HullVerdict::Outside { separator } => json!({
                "verdict": "outside",
                "separator": separator.iter().map(|q| rational_string(q)).collect::<Vec<_>>(),
            }),
        }
    }
}

/// Exact rational feasibility test for 0 in the convex hull of the spectrum.
/// The returned certificate has been re-verified by substitution.
pub fn hull_contains_zero(s: &Spectrum) -> Result<HullVerdict, AbelianError> {
    if s.points.is_empty() {
        return Err(AbelianError::EmptySpectrum);
    }
    let d = s.dim;
    let k = s.points.len();
    if s.points.iter().any(|p| p.len() != d) {
        return Err(AbelianError::Parse("ragged spectrum".into()));
    }
    let mut a = vec![vec![Rational::zero(); k]; d + 1];
    for (i, pt) in s.points.iter().enumerate() {
        for r in 0..d {
            a[r][i] = pt[r].clone();
        }
        a[d][i] = Rational::one();
    }
    let mut b = vec![Rational::zero(); d + 1];
    b[d] = Rational::one();
    match simplex::solve_feasibility(&a, &b) {
        Feasibility::Feasible(lambda) => {
            let mut sum = Rational::zero();
            for l in &lambda {
                if l.is_negative() {
                    return Err(AbelianError::CertificateFailure);
                }
                sum += l;
            }
            if !sum.is_one() {
                return Err(AbelianError::CertificateFailure);
            }
            for r in 0..d {
                let mut acc = Rational::zero();
                for (i, pt) in s.points.iter().enumerate() {
                    acc += &lambda[i] * &pt[r];
                }
                if !acc.is_zero() {
                    return Err(AbelianError::CertificateFailure);
                }
            }
            Ok(HullVerdict::Inside {
                coefficients: lambda,
            })
        }
        Feasibility::Infeasible(y) => {
            let h: Vec<Rational> = (0..d).map(|r| -y[r].clone()).collect();
            for pt in &s.points {
                let mut dot = Rational::zero();
                for r in 0..d {
                    dot += &h[r] * &pt[r];
                }
                if !dot.is_positive() {
                    return Err(AbelianError::CertificateFailure);
                }
            }
            Ok(HullVerdict::Outside { separator: h })
        }
    }
}

/// Exhaustive membership oracle: tries every subset of up to dim+1 points
/// whose lifted columns are linearly independent and solves the convex
/// combination exactly. Exponential in the point count; meant as an
/// independent cross-check for small spectra.
pub fn hull_brute_force(s: &Spectrum) -> Result<bool, AbelianError> {
    if s.points.is_empty() {
        return Err(AbelianError::EmptySpectrum);
    }
    let mut chosen = Vec::new();
    Ok(search_subsets(&s.points, s.dim, 0, &mut chosen))
}

fn search_subsets(
    points: &[Vec<Rational>],
    d: usize,
    start: usize,
    chosen: &mut Vec<usize>,
) -> bool {
    if !chosen.is_empty() {
        let a: Vec<Vec<Rational>> = (0..=d)
            .map(|r| {
                chosen
                    .iter()
                    .map(|&i| {
                        if r < d {
                            points[i][r].clone()
                        } else {
                            Rational::one()
                        }
                    })
                    .collect()
            })
            .collect();
        let mut b = vec![Rational::zero(); d + 1];
        b[d] = Rational::one();
        if let Some(x) = solve_unique(&a, &b) {
            if x.iter().all(|v| !v.is_negative()) {
                return true;
            }
        }
    }
    if chosen.len() == d + 1 {
        return false;
    }
    for i in start..points.len() {
        chosen.push(i);
        if search_subsets(points, d, i + 1, chosen) {
            return true;
        }
        chosen.pop();
    }
    false
}

/// Gauss-Jordan solve returning the solution only when it is unique.
fn solve_unique(a: &[Vec<Rational>], b: &[Rational]) -> Option<Vec<Rational>> {
    let m = a.len();
    let n = a[0].len();
    let mut aug: Vec<Vec<Rational>> = (0..m)
        .map(|r| {
            let mut row = a[r].clone();
            row.push(b[r].clone());
            row
        })
        .collect();
    let mut row = 0;
    for col in 0..n {
        let pivot = (row..m).find(|&r| !aug[r][col].is_zero())?;
        aug.swap(row, pivot);
        let p = aug[row][col].clone();
        for v in &mut aug[row] {
            *v /= &p;
        }
        for r in 0..m {
            if r != row && !aug[r][col].is_zero() {
                let f = aug[r][col].clone();
                for c in 0..=n {
                    let d = &f * &aug[row][c];
                    aug[r][c] -= d;
                }
            }
        }
        row += 1;
    }
    for r in row..m {
        if !aug[r][n].is_zero() {
            return None;
        }
    }
    Some((0..n).map(|c| aug[c][n].clone()).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProbeStatus {
    /// Some moment is nonzero, so the vanishing hypothesis fails and the
    /// hull question is moot.
    HypothesisNotSatisfied { first_nonzero_power: u32 },
    /// All computed moments vanish and 0 is outside the hull.
    ConjectureConsistent,
    /// All computed moments vanish yet 0 lies inside the hull.
    CounterexampleCandidate,
}

impl ProbeStatus {
    pub fn label(&self) -> &'static str {
        match self {
            ProbeStatus::HypothesisNotSatisfied { .. } => "hypothesis not satisfied",
            ProbeStatus::ConjectureConsistent => "conjecture-consistent",
            ProbeStatus::CounterexampleCandidate => "counterexample-candidate",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub group: Group,
    pub n: usize,
    pub pmax: u32,
    /// Moments for P = 1..=pmax.
    pub moments: Vec<ExactScalar>,
    pub spectrum: Spectrum,
    /// None when the spectrum is empty.
    pub hull: Option<HullVerdict>,
    pub status: ProbeStatus,
}

impl ProbeReport {
    pub fn to_json(&self) -> Value {
        json!({
            "group": self.group.as_str(),
            "n": self.n,
            "pmax": self.pmax,
            "moments": self.moments.iter().enumerate().map(|(i, m)| {
                let (re, im) = m.to_complex(12).unwrap_or((f64::NAN, f64::NAN));
                json!({"p": i + 1, "exact": m.to_json(), "float": [re, im]})
            }).collect::<Vec<_>>(),
            "spectrum": self.spectrum.to_json(),
            "hull": self.hull.as_ref().map(HullVerdict::to_json).unwrap_or(Value::Null),
            "status": self.status.label(),
        })
    }
}

/// Run the moment/hull probe: exact moments up to pmax, the spectrum, the
/// hull verdict, and the pattern classification.
pub fn conjecture_probe(
    f: &FiniteTypeFunction,
    pmax: u32,
) -> Result<ProbeReport, AbelianError> {
    if pmax == 0 {
        return Err(AbelianError::ZeroPower);
    }
    let g = tilde(f)?;
    let mut moments = Vec::with_capacity(pmax as usize);
    let mut power = AdmissibleFunction::constant(g.group, g.n, ExactScalar::one());
    let mut first_nonzero = None;
    for p in 1..=pmax {
        power = power.try_mul(&g)?;
        let m = moment_of(&power)?;
        if first_nonzero.is_none() && !m.is_zero() {
            first_nonzero = Some(p);
        }
        moments.push(m);
    }
    let sp = spectrum(&g);
    let hull = if sp.points.is_empty() {
        None
    } else {
        Some(hull_contains_zero(&sp)?)
    };
    let status = match first_nonzero {
        Some(p) => ProbeStatus::HypothesisNotSatisfied {
            first_nonzero_power: p,
        },
        None => match &hull {
            Some(HullVerdict::Inside { .. }) => ProbeStatus::CounterexampleCandidate,
            _ => ProbeStatus::ConjectureConsistent,
        },
    };
    Ok(ProbeReport {
        group: f.group,
        n: f.n,
        pmax,
        moments,
        spectrum: sp,
        hull,
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::euler::random_interior;
    use crate::finite_type::{expand, symbolic_entries, EntryPolynomial};
    use crate::haar::mc_integrate;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn entry_moment(group: Group, n: usize, shorthand: &str, p: u32) -> ExactScalar {
        let poly = EntryPolynomial::parse(shorthand).unwrap();
        let f = expand(&poly, group, n).unwrap();
        exact_moment(&tilde(&f).unwrap(), p).unwrap()
    }

    fn assert_rational(v: &ExactScalar, p: i64, q: i64) {
        assert_eq!(v.as_rational(), Some(rat_i64(p, q)), "expected {p}/{q}");
    }

    #[test]
    fn unit_integral_is_exactly_one() {
        for (group, ranks) in [(Group::Su, 2..=4), (Group::So, 2..=5)] {
            for n in ranks {
                let one = AdmissibleFunction::constant(group, n, ExactScalar::one());
                let m = exact_moment(&one, 1).unwrap();
                assert!(m.is_one(), "{group}({n}) unit integral: {m:?}");
                let m3 = exact_moment(&one, 3).unwrap();
                assert!(m3.is_one());
            }
        }
    }

    #[test]
    fn frozen_unitary_moments() {
        assert_rational(&entry_moment(Group::Su, 2, "u11*cu11", 1), 1, 2);
        assert_rational(&entry_moment(Group::Su, 2, "u11*cu11", 2), 1, 3);
        assert_rational(&entry_moment(Group::Su, 2, "u11*cu11*u22*cu22", 1), 1, 3);
        assert_rational(&entry_moment(Group::Su, 3, "u11*cu11", 1), 1, 3);
        assert_rational(&entry_moment(Group::Su, 3, "u11*cu11", 2), 1, 6);
        assert_rational(&entry_moment(Group::Su, 3, "u11*u22*cu12*cu21", 1), -1, 24);
    }

    #[test]
    fn frozen_orthogonal_moments() {
        assert_rational(&entry_moment(Group::So, 3, "u11^2", 1), 1, 3);
        assert_rational(&entry_moment(Group::So, 3, "u11^2", 2), 1, 5);
        assert_rational(&entry_moment(Group::So, 3, "u11^2*u22^2", 1), 2, 15);
        assert_rational(&entry_moment(Group::So, 4, "u11^2", 1), 1, 4);
    }

    #[test]
    fn off_diagonal_entry_moments_vanish() {
        for p in 1..=6 {
            let m = entry_moment(Group::Su, 2, "u12", p);
            assert!(m.is_zero(), "power {p}");
        }
    }

    #[test]
    fn circle_factor_values() {
        let two_pi = circle_factor(&Rational::zero()).unwrap();
        let (re, im) = two_pi.to_complex(12).unwrap();
        assert!((re - 2.0 * std::f64::consts::PI).abs() < 1e-12 && im.abs() < 1e-14);
        assert!(circle_factor(&rat_i64(3, 1)).unwrap().is_zero());
        // numeric oracle at q = 1/2: integral of e^{i theta/2} = 4i
        let half = circle_factor(&rat_i64(1, 2)).unwrap();
        let (re, im) = half.to_complex(12).unwrap();
        assert!(re.abs() < 1e-14 && (im - 4.0).abs() < 1e-12, "got {re}+{im}i");
        // and against a crude trapezoid sum
        let steps = 400_000;
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..steps {
            let t = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / steps as f64;
            acc += Complex64::from_polar(1.0, 0.5 * t);
        }
        acc *= 2.0 * std::f64::consts::PI / steps as f64;
        assert!((acc - Complex64::new(re, im)).norm() < 1e-6);
    }

    #[test]
    fn jacobian_shapes() {
        let j2 = jacobian(Group::Su, 2).unwrap();
        assert_eq!(j2.powers, vec![(1, 0)]);
        let c = haar::normalization(Group::Su, 2).unwrap().total_computed;
        assert_eq!(j2.constant, c);
        let j3 = jacobian(Group::So, 3).unwrap();
        assert_eq!(j3.powers, vec![(0, 0)]);
        // nonnegative over sampled domain points
        let mut rng = StdRng::seed_from_u64(11);
        for (group, n) in [(Group::Su, 3), (Group::So, 4)] {
            let j = jacobian(group, n).unwrap();
            for _ in 0..1000 {
                let xs: Vec<f64> = j
                    .powers
                    .iter()
                    .map(|_| match group {
                        Group::Su => rng.gen_range(0.0..1.0),
                        Group::So => rng.gen_range(-1.0..1.0),
                    })
                    .collect();
                assert!(j.eval(&xs) >= 0.0);
            }
        }
    }

    #[test]
    fn tilde_eval_matches_finite_type() {
        let mut rng = StdRng::seed_from_u64(19);
        for (group, n) in [(Group::Su, 2), (Group::Su, 3), (Group::So, 3), (Group::So, 4)] {
            let entries = symbolic_entries(group, n).unwrap();
            let f = entries[0][0]
                .try_mul(&entries[1][1].conj())
                .unwrap()
                .try_add(&entries[0][1])
                .unwrap();
            let g = tilde(&f).unwrap();
            for _ in 0..10 {
                let a = random_interior(group, n, &mut rng);
                let lhs = f.eval(&a);
                let rhs = g.eval_angles(&a);
                assert!((lhs - rhs).norm() < 1e-12, "{group}({n})");
            }
        }
    }

    #[test]
    fn tilde_is_multiplicative() {
        let entries = symbolic_entries(Group::Su, 3).unwrap();
        let f = &entries[0][1];
        let g = &entries[2][1].conj();
        let lhs = tilde(&f.try_mul(g).unwrap()).unwrap();
        let rhs = tilde(f).unwrap().try_mul(&tilde(g).unwrap()).unwrap();
        assert_eq!(lhs, rhs);
        // and on the orthogonal side
        let entries = symbolic_entries(Group::So, 3).unwrap();
        let f = &entries[0][0];
        let g = &entries[1][2];
        let lhs = tilde(&f.try_mul(g).unwrap()).unwrap();
        let rhs = tilde(f).unwrap().try_mul(&tilde(g).unwrap()).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn tilde_halves_leading_phase_exponent() {
        // the leading circle coordinate of SU(2) carries divisor 2, a
        // diagonal phase divisor 1; entry (1,1) = e^{i phi} cos(psi) e^{i w}
        let entries = symbolic_entries(Group::Su, 2).unwrap();
        let g = tilde(&entries[0][0]).unwrap();
        let keys: Vec<&Vec<Rational>> = g.terms().map(|(m, _)| m).collect();
        assert_eq!(keys.len(), 1);
        assert_eq!(keys[0], &vec![rat_i64(1, 2), rat_i64(1, 1)]);
    }

    #[test]
    fn moment_matches_monte_carlo() {
        let mut rng = StdRng::seed_from_u64(23);
        for (group, n) in [(Group::Su, 2), (Group::So, 3)] {
            for _ in 0..6 {
                let entries = symbolic_entries(group, n).unwrap();
                // random 2-3 term combination of entries and conjugates
                let mut f = FiniteTypeFunction::zero(group, n);
                for _ in 0..rng.gen_range(2..=3) {
                    let r = rng.gen_range(0..n);
                    let c = rng.gen_range(0..n);
                    let e = if rng.gen_bool(0.5) {
                        entries[r][c].clone()
                    } else {
                        entries[r][c].conj()
                    };
                    let scaled = e
                        .try_scale(&ExactScalar::from_rational(rat_i64(
                            rng.gen_range(-2..=2),
                            1,
                        )))
                        .unwrap();
                    f = f.try_add(&scaled).unwrap();
                }
                let g = tilde(&f).unwrap();
                let ev = f.evaluator();
                for p in 1..=3u32 {
                    let exact = exact_moment(&g, p).unwrap();
                    let (re, im) = exact.to_complex(12).unwrap();
                    let (mc, err) =
                        mc_integrate(|a| ev(a).powu(p), group, n, 40_000, 7).unwrap();
                    let dist = (mc - Complex64::new(re, im)).norm();
                    assert!(
                        dist < 5.0 * err + 1e-9,
                        "{group}({n}) P={p}: exact {re}+{im}i vs mc {mc}, err {err}"
                    );
                }
            }
        }
    }

    #[test]
    fn spectrum_and_sumset() {
        let entries = symbolic_entries(Group::Su, 2).unwrap();
        let f = entries[0][0].try_add(&entries[0][1].conj()).unwrap();
        let g = tilde(&f).unwrap();
        let s1 = spectrum(&g);
        assert_eq!(s1.points.len(), 2);
        for p in 2..=3u32 {
            let sp = spectrum(&g.try_pow(p).unwrap());
            // every exponent of f^p is a p-fold sum of exponents of f
            for pt in &sp.points {
                let mut found = false;
                'outer: for i in 0..s1.points.len() {
                    for j in 0..s1.points.len() {
                        for k in 0..s1.points.len() {
                            let mut acc = vec![Rational::zero(); s1.dim];
                            let picks: Vec<usize> = match p {
                                2 => vec![i, j],
                                _ => vec![i, j, k],
                            };
                            for &t in &picks {
                                for (r, val) in s1.points[t].iter().enumerate() {
                                    acc[r] += val;
                                }
                            }
                            if &acc == pt {
                                found = true;
                                break 'outer;
                            }
                        }
                    }
                }
                assert!(found, "exponent {pt:?} not in the {p}-fold sumset");
            }
        }
        // zero function has empty spectrum
        let z = AdmissibleFunction::zero(Group::Su, 2);
        assert!(spectrum(&z).points.is_empty());
        assert!(matches!(
            hull_contains_zero(&spectrum(&z)),
            Err(AbelianError::EmptySpectrum)
        ));
    }

    fn spectrum_of(dim: usize, pts: &[&[i64]]) -> Spectrum {
        Spectrum {
            dim,
            points: pts
                .iter()
                .map(|p| p.iter().map(|&v| rat_i64(v, 1)).collect())
                .collect(),
        }
    }

    #[test]
    fn hull_examples() {
        let s = spectrum_of(1, &[&[1], &[-1]]);
        match hull_contains_zero(&s).unwrap() {
            HullVerdict::Inside { coefficients } => {
                assert_eq!(coefficients, vec![rat_i64(1, 2), rat_i64(1, 2)]);
            }
            v => panic!("expected inside, got {v:?}"),
        }
        let s = spectrum_of(2, &[&[1, 1], &[1, 0]]);
        match hull_contains_zero(&s).unwrap() {
            HullVerdict::Outside { separator } => {
                for pt in &s.points {
                    let dot: Rational = separator
                        .iter()
                        .zip(pt)
                        .map(|(h, m)| h * m)
                        .fold(Rational::zero(), |a, b| a + b);
                    assert!(dot.is_positive());
                }
            }
            v => panic!("expected outside, got {v:?}"),
        }
        let s = spectrum_of(2, &[&[2, 0], &[0, 2], &[-1, -1]]);
        assert!(hull_contains_zero(&s).unwrap().contains_zero());
        assert!(hull_brute_force(&s).unwrap());
    }

    #[test]
    fn hull_matches_brute_force_on_random_spectra() {
        let mut rng = StdRng::seed_from_u64(29);
        for _ in 0..150 {
            let dim = rng.gen_range(1..=3);
            let count = rng.gen_range(1..=8);
            let mut points: Vec<Vec<Rational>> = (0..count)
                .map(|_| {
                    (0..dim)
                        .map(|_| rat_i64(rng.gen_range(-3..=3), rng.gen_range(1..=2)))
                        .collect()
                })
                .collect();
            points.sort();
            points.dedup();
            let s = Spectrum { dim, points };
            let verdict = hull_contains_zero(&s).unwrap();
            let brute = hull_brute_force(&s).unwrap();
            assert_eq!(verdict.contains_zero(), brute, "spectrum {:?}", s.points);
        }
    }

    #[test]
    fn probe_off_diagonal_entry() {
        let f = expand(
            &EntryPolynomial::parse("u12").unwrap(),
            Group::Su,
            2,
        )
        .unwrap();
        let report = conjecture_probe(&f, 6).unwrap();
        assert!(report.moments.iter().all(ExactScalar::is_zero));
        assert_eq!(report.status, ProbeStatus::ConjectureConsistent);
        assert_eq!(report.status.label(), "conjecture-consistent");
        assert!(!report.hull.unwrap().contains_zero());
    }

    #[test]
    fn probe_constant_function() {
        let f = FiniteTypeFunction::one(Group::Su, 2);
        let report = conjecture_probe(&f, 3).unwrap();
        assert!(report.moments.iter().all(ExactScalar::is_one));
        assert_eq!(
            report.status,
            ProbeStatus::HypothesisNotSatisfied {
                first_nonzero_power: 1
            }
        );
        assert_eq!(report.status.label(), "hypothesis not satisfied");
        let j = report.to_json();
        assert_eq!(j["status"], "hypothesis not satisfied");
        assert_eq!(j["moments"][0]["float"][0], 1.0);
    }

    #[test]
    fn admissible_json_round_trip() {
        let entries = symbolic_entries(Group::Su, 3).unwrap();
        let f = entries[0][0].try_mul(&entries[1][1].conj()).unwrap();
        let g = tilde(&f).unwrap();
        let j = g.to_json();
        let back = AdmissibleFunction::from_json(&j).unwrap();
        assert_eq!(g, back);
        // validation trips on denominators outside the lattice
        let mut bad = j.clone();
        bad["terms"][0]["m"][0] = Value::String("1/7".into());
        assert!(matches!(
            AdmissibleFunction::from_json(&bad),
            Err(AbelianError::NotAdmissible(_))
        ));
        // and on shape mismatches
        let mut bad = j.clone();
        bad["z_vars"] = json!(3);
        assert!(matches!(
            AdmissibleFunction::from_json(&bad),
            Err(AbelianError::Parse(_))
        ));
    }

    #[test]
    fn zero_power_is_rejected() {
        let one = AdmissibleFunction::constant(Group::Su, 2, ExactScalar::one());
        assert!(matches!(
            exact_moment(&one, 0),
            Err(AbelianError::ZeroPower)
        ));
        let f = FiniteTypeFunction::one(Group::Su, 2);
        assert!(matches!(
            conjecture_probe(&f, 0),
            Err(AbelianError::ZeroPower)
        ));
    }

    #[test]
    fn single_torus_monomial_vanishes() {
        // nonzero integer exponent on one z-variable: every moment is zero
        let mut f = AdmissibleFunction::zero(Group::Su, 2);
        let mut key = vec![Rational::zero(); f.z_vars()];
        key[1] = Rational::one();
        f.insert(key, XPolynomial::constant(f.x_vars(), ExactScalar::one()))
            .unwrap();
        for p in 1..=4 {
            assert!(exact_moment(&f, p).unwrap().is_zero());
        }
    }
}
