//! Cyclotomic numbers with a unique canonical form.
//!
//! A value is stored as a finite map {r -> c_r} meaning sum c_r e^{2 pi i r},
//! with every exponent reduced into [0,1). Canonicalization reduces the terms
//! against the cyclotomic polynomial of the least common order and then
//! descends to the true conductor, so equal values always have identical
//! term maps (e.g. zeta_6 is stored as 1 + zeta_3, and -1 as the rational -1).

use super::{ExactError, Int, Rational, MAX_ORDER};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct CyclotomicNumber {
    terms: BTreeMap<Rational, Rational>,
}

impl CyclotomicNumber {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::from_rational(Rational::one())
    }

    pub fn from_rational(c: Rational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Rational::zero(), c);
        }
        Self { terms }
    }

    /// Canonical e^{2 pi i r}; r is reduced mod 1 first.
    pub fn root_of_unity(r: &Rational) -> Result<Self, ExactError> {
        let mut terms = BTreeMap::new();
        terms.insert(reduce_mod_one(r), Rational::one());
        canonicalize(terms)
    }

    /// Terms as (exponent in [0,1), coefficient) pairs in exponent order.
    pub fn terms(&self) -> impl Iterator<Item = (&Rational, &Rational)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1
            && self
                .terms
                .get(&Rational::zero())
                .map(|c| c.is_one())
                .unwrap_or(false)
    }

    /// The rational value, if the number lies in Q.
    pub fn as_rational(&self) -> Option<Rational> {
        if self.is_zero() {
            return Some(Rational::zero());
        }
        if self.terms.len() == 1 {
            if let Some(c) = self.terms.get(&Rational::zero()) {
                return Some(c.clone());
            }
        }
        None
    }

    /// Re-run canonicalization (idempotent by construction).
    pub fn normalize(&self) -> Self {
        canonicalize(self.terms.clone()).expect("already-canonical value re-normalizes")
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, ExactError> {
        let mut terms = self.terms.clone();
        for (r, c) in &other.terms {
            let entry = terms.entry(r.clone()).or_insert_with(Rational::zero);
            *entry += c;
        }
        canonicalize(terms)
    }

    pub fn neg(&self) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|(r, c)| (r.clone(), -c.clone()))
            .collect();
        Self { terms }
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self, ExactError> {
        self.try_add(&other.neg())
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self, ExactError> {
        let mut terms: BTreeMap<Rational, Rational> = BTreeMap::new();
        for (r1, c1) in &self.terms {
            for (r2, c2) in &other.terms {
                let r = reduce_mod_one(&(r1 + r2));
                let entry = terms.entry(r).or_insert_with(Rational::zero);
                *entry += c1 * c2;
            }
        }
        canonicalize(terms)
    }

    pub fn scale(&self, c: &Rational) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        let terms = self
            .terms
            .iter()
            .map(|(r, v)| (r.clone(), v * c))
            .collect();
        Self { terms }
    }

    /// Complex conjugate: every root exponent r maps to -r mod 1.
    pub fn conj(&self) -> Self {
        let terms: BTreeMap<Rational, Rational> = self
            .terms
            .iter()
            .map(|(r, c)| (reduce_mod_one(&-r.clone()), c.clone()))
            .collect();
        canonicalize(terms).expect("conjugation preserves the order")
    }

    /// Multiplicative inverse via the extended Euclidean algorithm modulo the
    /// cyclotomic polynomial of the value's order.
    pub fn try_inv(&self) -> Result<Self, ExactError> {
        if self.is_zero() {
            return Err(ExactError::NonInvertible);
        }
        if let Some(q) = self.as_rational() {
            return Ok(Self::from_rational(q.recip()));
        }
        let l = common_order(&self.terms)?;
        let phi = cyclotomic_poly(l);
        let a = dense_vector(&self.terms, l);
        let a = poly_mod(&a, &phi);
        let inv = poly_inverse_mod(&a, &phi).ok_or(ExactError::NonInvertible)?;
        let mut terms = BTreeMap::new();
        for (b, c) in inv.iter().enumerate() {
            if !c.is_zero() {
                terms.insert(
                    Rational::new(Int::from(b as u64), Int::from(l)),
                    c.clone(),
                );
            }
        }
        canonicalize(terms)
    }

    /// Complex embedding with a crude running error bound; `None` if a
    /// coefficient does not fit in f64 range.
    pub(crate) fn embed(&self) -> Option<(f64, f64, f64)> {
        let mut re = 0.0;
        let mut im = 0.0;
        let mut mag = 0.0;
        for (r, c) in &self.terms {
            let cf = c.to_f64()?;
            if !cf.is_finite() {
                return None;
            }
            let rf = r.to_f64()?;
            let theta = 2.0 * std::f64::consts::PI * rf;
            re += cf * theta.cos();
            im += cf * theta.sin();
            mag += cf.abs();
        }
        Some((re, im, mag))
    }
}

/// Reduce a rational into [0, 1).
pub(crate) fn reduce_mod_one(r: &Rational) -> Rational {
    let f = r.floor();
    r - f
}

/// lcm of term-exponent denominators, guarded.
fn common_order(terms: &BTreeMap<Rational, Rational>) -> Result<u64, ExactError> {
    let mut l = Int::one();
    for r in terms.keys() {
        l = l.lcm(r.denom());
        if l > Int::from(MAX_ORDER) {
            return Err(ExactError::DegreeGuard(l.to_u64().unwrap_or(u64::MAX)));
        }
    }
    Ok(l.to_u64().expect("guarded order fits u64"))
}

/// Canonical form: reduce modulo the order-L cyclotomic polynomial, then
/// descend the conductor prime by prime while the value stays representable.
fn canonicalize(terms: BTreeMap<Rational, Rational>) -> Result<CyclotomicNumber, ExactError> {
    let terms: BTreeMap<Rational, Rational> = terms
        .into_iter()
        .filter(|(_, c)| !c.is_zero())
        .map(|(r, c)| (reduce_mod_one(&r), c))
        .fold(BTreeMap::new(), |mut acc, (r, c)| {
            let e = acc.entry(r).or_insert_with(Rational::zero);
            *e += c;
            acc
        });
    let terms: BTreeMap<Rational, Rational> =
        terms.into_iter().filter(|(_, c)| !c.is_zero()).collect();
    if terms.is_empty() {
        return Ok(CyclotomicNumber::zero());
    }

    let mut l = common_order(&terms)?;
    let mut coeffs = {
        let phi = cyclotomic_poly(l);
        poly_mod(&dense_vector(&terms, l), &phi)
    };

    // Conductor descent: try each prime p | L; on success restart.
    'descend: loop {
        if l == 1 {
            break;
        }
        for p in prime_factors(l) {
            let m = l / p;
            if let Some(smaller) = try_descend(&coeffs, l, m) {
                coeffs = smaller;
                l = m;
                continue 'descend;
            }
        }
        break;
    }

    let mut out = BTreeMap::new();
    for (b, c) in coeffs.iter().enumerate() {
        if !c.is_zero() {
            out.insert(
                Rational::new(Int::from(b as u64), Int::from(l)),
                c.clone(),
            );
        }
    }
    Ok(CyclotomicNumber { terms: out })
}

/// Express `coeffs` (power basis of zeta_L, already reduced mod Phi_L) in the
/// power basis of zeta_m where m = L/p, if possible.
fn try_descend(coeffs: &[Rational], l: u64, m: u64) -> Option<Vec<Rational>> {
    let phi_l = cyclotomic_poly(l);
    let deg_l = phi_l.len() - 1;
    let deg_m = cyclotomic_poly(m).len() - 1;
    let p = l / m;
    // Columns: zeta_L^{p b} = zeta_m^b reduced mod Phi_L, b = 0..deg_m.
    let mut cols = Vec::with_capacity(deg_m);
    for b in 0..deg_m as u64 {
        let mut mono = vec![Rational::zero(); (p * b) as usize + 1];
        let last = mono.len() - 1;
        mono[last] = Rational::one();
        cols.push(poly_mod(&mono, &phi_l));
    }
    let mut rhs = coeffs.to_vec();
    rhs.resize(deg_l, Rational::zero());
    solve_exact(&cols, &rhs, deg_l)
}

/// Solve sum_b y_b col_b = rhs exactly (cols given as length-deg_l vectors).
fn solve_exact(cols: &[Vec<Rational>], rhs: &[Rational], rows: usize) -> Option<Vec<Rational>> {
    let n = cols.len();
    // Augmented row-major matrix rows x (n+1).
    let mut a = vec![vec![Rational::zero(); n + 1]; rows];
    for (j, col) in cols.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            a[i][j] = v.clone();
        }
    }
    for (i, v) in rhs.iter().enumerate() {
        a[i][n] = v.clone();
    }
    let mut pivot_row = 0;
    let mut pivots = Vec::new();
    for col in 0..n {
        let Some(r) = (pivot_row..rows).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(pivot_row, r);
        let inv = a[pivot_row][col].clone().recip();
        for v in a[pivot_row][col..].iter_mut() {
            *v *= &inv;
        }
        for r2 in 0..rows {
            if r2 != pivot_row && !a[r2][col].is_zero() {
                let f = a[r2][col].clone();
                for c2 in col..=n {
                    let sub = &a[pivot_row][c2] * &f;
                    a[r2][c2] -= sub;
                }
            }
        }
        pivots.push((pivot_row, col));
        pivot_row += 1;
        if pivot_row == rows {
            break;
        }
    }
    // Inconsistent if any zero-row has nonzero rhs.
    for r in pivot_row..rows {
        if !a[r][n].is_zero() {
            return None;
        }
    }
    // Free columns would make the solution non-unique; the embedded power
    // basis is linearly independent, so every column must have a pivot.
    if pivots.len() != n {
        return None;
    }
    let mut y = vec![Rational::zero(); n];
    for (r, c) in pivots {
        y[c] = a[r][n].clone();
    }
    Some(y)
}

/// Dense coefficient vector of length L from the term map (exponents a/L).
fn dense_vector(terms: &BTreeMap<Rational, Rational>, l: u64) -> Vec<Rational> {
    let mut dense = vec![Rational::zero(); l as usize];
    for (r, c) in terms {
        let denom = r.denom().to_u64().expect("guarded");
        let a = (r.numer().to_u64().expect("exponent in [0,1)") * (l / denom)) % l;
        dense[a as usize] += c;
    }
    dense
}

/// Coefficients (ascending degree) of the n-th cyclotomic polynomial.
fn cyclotomic_poly(n: u64) -> Vec<Rational> {
    fn go(n: u64, memo: &mut BTreeMap<u64, Vec<Rational>>) -> Vec<Rational> {
        if let Some(p) = memo.get(&n) {
            return p.clone();
        }
        // x^n - 1 divided by Phi_d for every proper divisor d of n.
        let mut num = vec![Rational::zero(); n as usize + 1];
        num[0] = -Rational::one();
        num[n as usize] = Rational::one();
        for d in 1..n {
            if n % d == 0 {
                let phi_d = go(d, memo);
                num = poly_div_exact(&num, &phi_d);
            }
        }
        memo.insert(n, num.clone());
        num
    }
    let mut memo = BTreeMap::new();
    go(n, &mut memo)
}

/// Exact division of polynomials (remainder must vanish).
fn poly_div_exact(num: &[Rational], den: &[Rational]) -> Vec<Rational> {
    let mut rem = num.to_vec();
    let dd = den.len() - 1;
    let lead = den[dd].clone();
    let mut quot = vec![Rational::zero(); rem.len().saturating_sub(dd)];
    for i in (dd..rem.len()).rev() {
        if rem[i].is_zero() {
            continue;
        }
        let f = &rem[i] / &lead;
        quot[i - dd] = f.clone();
        for (k, dv) in den.iter().enumerate() {
            let sub = dv * &f;
            rem[i - dd + k] -= sub;
        }
    }
    debug_assert!(rem.iter().all(|c| c.is_zero()), "non-exact poly division");
    quot
}

/// Remainder of `poly` modulo monic `m`, returned with len = deg(m).
fn poly_mod(poly: &[Rational], m: &[Rational]) -> Vec<Rational> {
    let dm = m.len() - 1;
    let mut rem = poly.to_vec();
    for i in (dm..rem.len()).rev() {
        if rem[i].is_zero() {
            continue;
        }
        let f = rem[i].clone();
        for (k, mv) in m.iter().enumerate() {
            let sub = mv * &f;
            rem[i - dm + k] -= sub;
        }
    }
    rem.truncate(dm);
    rem.resize(dm, Rational::zero());
    rem
}

/// Inverse of `a` modulo monic irreducible `m` via extended Euclid in Q[x].
fn poly_inverse_mod(a: &[Rational], m: &[Rational]) -> Option<Vec<Rational>> {
    // Invariants: r0 = s0*a mod m (t-coefficients of m are not tracked).
    let mut r0 = m.to_vec();
    let mut r1 = trim(a.to_vec());
    let mut s0 = vec![];
    let mut s1 = vec![Rational::one()];
    if r1.is_empty() {
        return None;
    }
    while degree(&r1) > 0 {
        let (q, r) = poly_divmod(&r0, &r1);
        let s = poly_sub(&s0, &poly_mul(&q, &s1));
        r0 = r1;
        r1 = trim(r);
        s0 = s1;
        s1 = s;
        if r1.is_empty() {
            return None; // gcd has positive degree: not invertible
        }
    }
    // r1 is a nonzero constant c: inverse = s1 / c, reduced mod m.
    let c = r1[0].clone();
    let inv: Vec<Rational> = s1.iter().map(|v| v / &c).collect();
    Some(poly_mod(&inv, m))
}

fn degree(p: &[Rational]) -> usize {
    p.len().saturating_sub(1)
}

fn trim(mut p: Vec<Rational>) -> Vec<Rational> {
    while p.last().map(|c| c.is_zero()).unwrap_or(false) {
        p.pop();
    }
    p
}

fn poly_divmod(num: &[Rational], den: &[Rational]) -> (Vec<Rational>, Vec<Rational>) {
    let dd = degree(den);
    let lead = den[dd].clone();
    let mut rem = num.to_vec();
    if num.len() <= dd {
        return (vec![], rem);
    }
    let mut quot = vec![Rational::zero(); num.len() - dd];
    for i in (dd..rem.len()).rev() {
        if rem[i].is_zero() {
            continue;
        }
        let f = &rem[i] / &lead;
        quot[i - dd] = f.clone();
        for (k, dv) in den.iter().enumerate() {
            let sub = dv * &f;
            rem[i - dd + k] -= sub;
        }
    }
    rem.truncate(dd);
    (quot, rem)
}

fn poly_mul(a: &[Rational], b: &[Rational]) -> Vec<Rational> {
    if a.is_empty() || b.is_empty() {
        return vec![];
    }
    let mut out = vec![Rational::zero(); a.len() + b.len() - 1];
    for (i, av) in a.iter().enumerate() {
        if av.is_zero() {
            continue;
        }
        for (j, bv) in b.iter().enumerate() {
            out[i + j] += av * bv;
        }
    }
    out
}

fn poly_sub(a: &[Rational], b: &[Rational]) -> Vec<Rational> {
    let n = a.len().max(b.len());
    let mut out = vec![Rational::zero(); n];
    for (i, v) in a.iter().enumerate() {
        out[i] += v;
    }
    for (i, v) in b.iter().enumerate() {
        out[i] -= v;
    }
    trim(out)
}

fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            out.push(p);
            while n % p == 0 {
                n /= p;
            }
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}
