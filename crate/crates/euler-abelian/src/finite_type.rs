//! Finite-type functions: trigonometric polynomials in the factorized
//! coordinates with exact coefficients, plus symbolic matrix entries and the
//! expansion of entry polynomials into this class.
//!
//! A monomial stores one integer Fourier exponent per circle coordinate and a
//! (free power, bounded power) pair per compact coordinate; the canonical
//! form keeps every bounded power in {0, 1} by rewriting its square as
//! 1 - free^2.

use crate::euler::{coordinate_specs, CoordKind, CoordRole, CoordinateSpec, EulerAngles, Group};
use crate::exact::{rat_i64, ExactError, ExactScalar, Int, Rational};
use num_complex::Complex64;
use num_traits::One;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use thiserror::Error;

/// Cap on intermediate term counts in products and normalization.
pub const TERM_GUARD: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FiniteTypeError {
    #[error("operands live on different groups or ranks")]
    Mismatch,
    #[error("term count {0} exceeds the expansion guard")]
    TermGuard(usize),
    #[error("matrix index ({row},{col}) out of range for rank {n}")]
    EntryIndex { row: usize, col: usize, n: usize },
    #[error("rank must be at least 2, got {0}")]
    RankTooSmall(usize),
    #[error(transparent)]
    Exact(#[from] ExactError),
}

/// Exponent data of a single monomial. Circle exponents follow the circle
/// coordinates in spec order (phi flat order, then omega); compact pairs
/// follow the compact coordinates in spec order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct EulerMonomial {
    pub circle: Vec<i64>,
    pub compact: Vec<(u32, u32)>,
}

impl EulerMonomial {
    fn unit(n_circle: usize, n_compact: usize) -> Self {
        Self {
            circle: vec![0; n_circle],
            compact: vec![(0, 0); n_compact],
        }
    }

    fn is_canonical(&self) -> bool {
        self.compact.iter().all(|&(_, b)| b <= 1)
    }
}

/// Split of the coordinate list into circle and compact parts, kept in spec
/// order.
#[derive(Debug, Clone)]
pub(crate) struct CoordSplit {
    pub circle: Vec<CoordinateSpec>,
    pub compact: Vec<CoordinateSpec>,
}

pub(crate) fn coord_split(group: Group, n: usize) -> CoordSplit {
    let mut circle = Vec::new();
    let mut compact = Vec::new();
    for spec in coordinate_specs(group, n) {
        match spec.role {
            CoordRole::Circle { .. } => circle.push(spec),
            CoordRole::Compact => compact.push(spec),
        }
    }
    CoordSplit { circle, compact }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteTypeFunction {
    pub group: Group,
    pub n: usize,
    terms: BTreeMap<EulerMonomial, ExactScalar>,
}

fn binom(t: u64, i: u64) -> Rational {
    let mut num = Int::one();
    let mut den = Int::one();
    for k in 0..i {
        num *= Int::from(t - k);
        den *= Int::from(k + 1);
    }
    Rational::new(num, den)
}

impl FiniteTypeFunction {
    pub fn zero(group: Group, n: usize) -> Self {
        Self {
            group,
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(group: Group, n: usize, c: ExactScalar) -> Self {
        let mut f = Self::zero(group, n);
        if !c.is_zero() {
            let split = coord_split(group, n);
            f.terms.insert(
                EulerMonomial::unit(split.circle.len(), split.compact.len()),
                c,
            );
        }
        f
    }

    pub fn one(group: Group, n: usize) -> Self {
        Self::constant(group, n, ExactScalar::one())
    }

    fn single(group: Group, n: usize, m: EulerMonomial, c: ExactScalar) -> Self {
        let mut f = Self::zero(group, n);
        if !c.is_zero() {
            f.terms.insert(m, c);
        }
        f
    }

    pub fn terms(&self) -> impl Iterator<Item = (&EulerMonomial, &ExactScalar)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn check_compatible(&self, other: &Self) -> Result<(), FiniteTypeError> {
        if self.group != other.group || self.n != other.n {
            return Err(FiniteTypeError::Mismatch);
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, FiniteTypeError> {
        self.check_compatible(other)?;
        let mut terms = self.terms.clone();
        for (m, c) in &other.terms {
            let merged = match terms.get(m) {
                Some(e) => e.try_add(c)?,
                None => c.clone(),
            };
            if merged.is_zero() {
                terms.remove(m);
            } else {
                terms.insert(m.clone(), merged);
            }
        }
        Ok(Self {
            group: self.group,
            n: self.n,
            terms,
        })
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self, FiniteTypeError> {
        self.try_add(&other.try_scale(&ExactScalar::from_rational(rat_i64(-1, 1)))?)
    }

    pub fn try_scale(&self, c: &ExactScalar) -> Result<Self, FiniteTypeError> {
        let mut terms = BTreeMap::new();
        for (m, v) in &self.terms {
            let s = v.try_mul(c)?;
            if !s.is_zero() {
                terms.insert(m.clone(), s);
            }
        }
        Ok(Self {
            group: self.group,
            n: self.n,
            terms,
        })
    }

    /// Rewrite every bounded power >= 2 via bounded^2 = 1 - free^2, merging
    /// the results. Idempotent and evaluation-preserving.
    pub fn normalize(&self) -> Result<Self, FiniteTypeError> {
        let mut terms: BTreeMap<EulerMonomial, ExactScalar> = BTreeMap::new();
        for (m, c) in &self.terms {
            for (mono, coeff) in reduce_monomial(m, c)? {
                let merged = match terms.get(&mono) {
                    Some(e) => e.try_add(&coeff)?,
                    None => coeff,
                };
                if merged.is_zero() {
                    terms.remove(&mono);
                } else {
                    terms.insert(mono, merged);
                }
                if terms.len() > TERM_GUARD {
                    return Err(FiniteTypeError::TermGuard(terms.len()));
                }
            }
        }
        Ok(Self {
            group: self.group,
            n: self.n,
            terms,
        })
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self, FiniteTypeError> {
        self.check_compatible(other)?;
        let mut raw: BTreeMap<EulerMonomial, ExactScalar> = BTreeMap::new();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                let mono = EulerMonomial {
                    circle: m1
                        .circle
                        .iter()
                        .zip(&m2.circle)
                        .map(|(a, b)| a + b)
                        .collect(),
                    compact: m1
                        .compact
                        .iter()
                        .zip(&m2.compact)
                        .map(|(a, b)| (a.0 + b.0, a.1 + b.1))
                        .collect(),
                };
                let c = c1.try_mul(c2)?;
                let merged = match raw.get(&mono) {
                    Some(e) => e.try_add(&c)?,
                    None => c,
                };
                if merged.is_zero() {
                    raw.remove(&mono);
                } else {
                    raw.insert(mono, merged);
                }
                if raw.len() > TERM_GUARD {
                    return Err(FiniteTypeError::TermGuard(raw.len()));
                }
            }
        }
        Self {
            group: self.group,
            n: self.n,
            terms: raw,
        }
        .normalize()
    }

    pub fn try_pow(&self, p: u32) -> Result<Self, FiniteTypeError> {
        let mut out = Self::one(self.group, self.n);
        for _ in 0..p {
            out = out.try_mul(self)?;
        }
        Ok(out)
    }

    /// Complex conjugate: circle exponents negate, coefficients conjugate,
    /// compact factors are real.
    pub fn conj(&self) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|(m, c)| {
                (
                    EulerMonomial {
                        circle: m.circle.iter().map(|k| -k).collect(),
                        compact: m.compact.clone(),
                    },
                    c.conj(),
                )
            })
            .collect();
        Self {
            group: self.group,
            n: self.n,
            terms,
        }
    }

    /// Precompiled numeric evaluator: exact coefficients embed to floats once
    /// so repeated evaluation (Monte Carlo loops) stays cheap.
    pub fn evaluator(&self) -> impl Fn(&EulerAngles) -> Complex64 + Sync {
        let group = self.group;
        let split = coord_split(self.group, self.n);
        let circle_coords: Vec<(CoordKind, usize)> =
            split.circle.iter().map(|s| (s.kind, s.index)).collect();
        let compact_coords: Vec<(CoordKind, usize)> =
            split.compact.iter().map(|s| (s.kind, s.index)).collect();
        let terms: Vec<(Complex64, Vec<i64>, Vec<(u32, u32)>)> = self
            .terms
            .iter()
            .map(|(m, c)| {
                let (re, im) = c.to_complex(12).expect("coefficients stay in f64 range");
                (Complex64::new(re, im), m.circle.clone(), m.compact.clone())
            })
            .collect();
        move |a: &EulerAngles| {
            let thetas: Vec<f64> = circle_coords
                .iter()
                .map(|&(kind, index)| coord_value_raw(a, kind, index))
                .collect();
            let trig: Vec<(f64, f64)> = compact_coords
                .iter()
                .map(|&(kind, index)| {
                    let v = coord_value_raw(a, kind, index);
                    match group {
                        Group::Su => (v.sin(), v.cos()),
                        Group::So => (v.cos(), v.sin()),
                    }
                })
                .collect();
            let mut total = Complex64::new(0.0, 0.0);
            for (coeff, circle, compact) in &terms {
                let mut phase = 0.0;
                for (k, theta) in circle.iter().zip(&thetas) {
                    phase += *k as f64 * theta;
                }
                let mut mag = 1.0;
                for ((free, bounded), (fv, bv)) in compact.iter().zip(&trig) {
                    mag *= fv.powi(*free as i32) * bv.powi(*bounded as i32);
                }
                total += coeff * mag * Complex64::from_polar(1.0, phase);
            }
            total
        }
    }

    pub fn eval(&self, a: &EulerAngles) -> Complex64 {
        let split = coord_split(self.group, self.n);
        let circle_vals: Vec<f64> = split
            .circle
            .iter()
            .map(|s| coord_value(a, s))
            .collect();
        let compact_vals: Vec<f64> = split
            .compact
            .iter()
            .map(|s| coord_value(a, s))
            .collect();
        let mut total = Complex64::new(0.0, 0.0);
        for (m, c) in &self.terms {
            let (re, im) = c.to_complex(12).expect("coefficients stay in f64 range");
            let mut v = Complex64::new(re, im);
            for (k, theta) in m.circle.iter().zip(&circle_vals) {
                if *k != 0 {
                    v *= Complex64::from_polar(1.0, *k as f64 * theta);
                }
            }
            for ((free, bounded), x) in m.compact.iter().zip(&compact_vals) {
                let (fv, bv) = match self.group {
                    Group::Su => (x.sin(), x.cos()),
                    Group::So => (x.cos(), x.sin()),
                };
                v *= fv.powi(*free as i32) * bv.powi(*bounded as i32);
            }
            total += v;
        }
        total
    }

    /// JSON: list of {"exponents": {"circle": [...], "compact": [[m,n],...]},
    /// "coeff": <exact scalar>}.
    pub fn to_json(&self) -> Value {
        let items: Vec<Value> = self
            .terms
            .iter()
            .map(|(m, c)| {
                json!({
                    "exponents": {
                        "circle": m.circle,
                        "compact": m.compact.iter().map(|&(a, b)| json!([a, b])).collect::<Vec<_>>(),
                    },
                    "coeff": c.to_json(),
                })
            })
            .collect();
        Value::Array(items)
    }

    pub fn from_json(group: Group, n: usize, v: &Value) -> Option<Self> {
        let split = coord_split(group, n);
        let mut f = Self::zero(group, n);
        for item in v.as_array()? {
            let exp = item.get("exponents")?;
            let circle: Vec<i64> = exp
                .get("circle")?
                .as_array()?
                .iter()
                .map(|x| x.as_i64())
                .collect::<Option<_>>()?;
            let compact: Vec<(u32, u32)> = exp
                .get("compact")?
                .as_array()?
                .iter()
                .map(|x| {
                    let p = x.as_array()?;
                    Some((p.first()?.as_u64()? as u32, p.get(1)?.as_u64()? as u32))
                })
                .collect::<Option<_>>()?;
            if circle.len() != split.circle.len() || compact.len() != split.compact.len() {
                return None;
            }
            let coeff = ExactScalar::from_json(item.get("coeff")?)?;
            let term = Self::single(group, n, EulerMonomial { circle, compact }, coeff);
            f = f.try_add(&term).ok()?;
        }
        f.normalize().ok()
    }
}

fn coord_value(a: &EulerAngles, spec: &CoordinateSpec) -> f64 {
    coord_value_raw(a, spec.kind, spec.index)
}

fn coord_value_raw(a: &EulerAngles, kind: CoordKind, index: usize) -> f64 {
    match kind {
        CoordKind::Phi => a.phi[index],
        CoordKind::Psi => a.psi[index],
        CoordKind::Omega => a.omega[index],
    }
}

/// Expand a compact-power vector into canonical ones (bounded powers in
/// {0,1}) by rewriting bounded^{2t} as (1 - free^2)^t.
pub(crate) fn reduce_compact(
    compact: &[(u32, u32)],
    c: &ExactScalar,
) -> Result<Vec<(Vec<(u32, u32)>, ExactScalar)>, FiniteTypeError> {
    let mut out: Vec<(Vec<(u32, u32)>, ExactScalar)> = vec![(compact.to_vec(), c.clone())];
    for slot in 0..compact.len() {
        let mut next = Vec::new();
        for (pw, coeff) in out {
            let (free, bounded) = pw[slot];
            if bounded <= 1 {
                next.push((pw, coeff));
                continue;
            }
            let t = (bounded / 2) as u64;
            let r = bounded % 2;
            for i in 0..=t {
                let mut p2 = pw.clone();
                p2[slot] = (free + 2 * i as u32, r);
                let sign = if i % 2 == 0 { 1 } else { -1 };
                let coef2 = coeff.scale(&(binom(t, i) * rat_i64(sign, 1)));
                if !coef2.is_zero() {
                    next.push((p2, coef2));
                }
            }
            if next.len() > TERM_GUARD {
                return Err(FiniteTypeError::TermGuard(next.len()));
            }
        }
        out = next;
    }
    Ok(out)
}

/// Expand one monomial into canonical ones (bounded powers in {0,1}).
fn reduce_monomial(
    m: &EulerMonomial,
    c: &ExactScalar,
) -> Result<Vec<(EulerMonomial, ExactScalar)>, FiniteTypeError> {
    if m.is_canonical() {
        return Ok(vec![(m.clone(), c.clone())]);
    }
    Ok(reduce_compact(&m.compact, c)?
        .into_iter()
        .map(|(compact, coeff)| {
            (
                EulerMonomial {
                    circle: m.circle.clone(),
                    compact,
                },
                coeff,
            )
        })
        .collect())
}

/// A product of matrix entries u_{ij} or their conjugates (1-based indices).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EntryFactor {
    pub row: usize,
    pub col: usize,
    pub conj: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntryTerm {
    pub coeff: ExactScalar,
    pub factors: Vec<EntryFactor>,
}

/// Polynomial in matrix entries and their conjugates with exact coefficients.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EntryPolynomial {
    pub terms: Vec<EntryTerm>,
}

impl EntryPolynomial {
    pub fn one() -> Self {
        Self {
            terms: vec![EntryTerm {
                coeff: ExactScalar::one(),
                factors: vec![],
            }],
        }
    }

    pub fn entry(row: usize, col: usize) -> Self {
        Self {
            terms: vec![EntryTerm {
                coeff: ExactScalar::one(),
                factors: vec![EntryFactor {
                    row,
                    col,
                    conj: false,
                }],
            }],
        }
    }

    /// Total degree of the highest-degree term.
    pub fn degree(&self) -> usize {
        self.terms.iter().map(|t| t.factors.len()).max().unwrap_or(0)
    }

    /// Numeric evaluation against a concrete matrix.
    pub fn eval(&self, m: &crate::generators::CMatrix) -> Complex64 {
        let mut total = Complex64::new(0.0, 0.0);
        for term in &self.terms {
            let (re, im) = term
                .coeff
                .to_complex(12)
                .expect("coefficients stay in f64 range");
            let mut v = Complex64::new(re, im);
            for f in &term.factors {
                let e = m[(f.row - 1, f.col - 1)];
                v *= if f.conj { e.conj() } else { e };
            }
            total += v;
        }
        total
    }

    /// Parse a compact shorthand: terms joined by `+`/`-`, each an optional
    /// rational coefficient and `*`-separated factors `u<r><c>`, `cu<r><c>`
    /// (conjugate), with optional `^<power>`. Examples: "u12", "2 u11*cu12",
    /// "1/3 u11^2 - cu21*u22", "1".
    pub fn parse(input: &str) -> Option<Self> {
        let mut terms = Vec::new();
        let cleaned = input.trim();
        if cleaned.is_empty() {
            return None;
        }
        // split into signed chunks
        let mut chunks: Vec<(i64, String)> = Vec::new();
        let mut current = String::new();
        let mut sign = 1i64;
        for (i, ch) in cleaned.chars().enumerate() {
            if (ch == '+' || ch == '-') && i > 0 && !current.trim().is_empty() {
                chunks.push((sign, current.trim().to_string()));
                current = String::new();
                sign = if ch == '-' { -1 } else { 1 };
            } else if ch == '-' && current.trim().is_empty() {
                sign = -sign;
            } else if ch == '+' && current.trim().is_empty() {
                // ignore leading plus
            } else {
                current.push(ch);
            }
        }
        if current.trim().is_empty() {
            return None;
        }
        chunks.push((sign, current.trim().to_string()));

        for (sign, chunk) in chunks {
            let mut coeff = ExactScalar::from_rational(rat_i64(sign, 1));
            let mut factors = Vec::new();
            for piece in chunk.split(['*', ' ']).filter(|p| !p.is_empty()) {
                if let Some(rest) = piece.strip_prefix("cu").or_else(|| piece.strip_prefix('u')) {
                    let conj = piece.starts_with("cu");
                    let (idx, pow) = match rest.split_once('^') {
                        Some((i, p)) => (i, p.parse::<u32>().ok()?),
                        None => (rest, 1),
                    };
                    let digits: Vec<u32> = idx.chars().map(|c| c.to_digit(10)).collect::<Option<_>>()?;
                    if digits.len() != 2 || digits[0] == 0 || digits[1] == 0 {
                        return None;
                    }
                    for _ in 0..pow {
                        factors.push(EntryFactor {
                            row: digits[0] as usize,
                            col: digits[1] as usize,
                            conj,
                        });
                    }
                } else {
                    // rational coefficient
                    let r = crate::exact::parse_rational(piece)?;
                    coeff = coeff.try_mul(&ExactScalar::from_rational(r)).ok()?;
                }
            }
            terms.push(EntryTerm { coeff, factors });
        }
        Some(Self { terms })
    }

    /// JSON: {"terms": [{"coeff": <exact scalar>, "factors":
    /// [{"row":1,"col":2,"conj":false}, ...]}]}.
    pub fn to_json(&self) -> Value {
        json!({
            "terms": self.terms.iter().map(|t| json!({
                "coeff": t.coeff.to_json(),
                "factors": t.factors.iter().map(|f| json!({
                    "row": f.row, "col": f.col, "conj": f.conj,
                })).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &Value) -> Option<Self> {
        let mut terms = Vec::new();
        for t in v.get("terms")?.as_array()? {
            let coeff = ExactScalar::from_json(t.get("coeff")?)?;
            let mut factors = Vec::new();
            for f in t.get("factors")?.as_array()? {
                factors.push(EntryFactor {
                    row: f.get("row")?.as_u64()? as usize,
                    col: f.get("col")?.as_u64()? as usize,
                    conj: f.get("conj")?.as_bool()?,
                });
            }
            terms.push(EntryTerm { coeff, factors });
        }
        Some(Self { terms })
    }
}

/// e^{i k theta} as a one-term function in circle coordinate `idx`.
fn circle_phase(
    group: Group,
    n: usize,
    split: &CoordSplit,
    idx: usize,
    k: i64,
) -> FiniteTypeFunction {
    let mut m = EulerMonomial::unit(split.circle.len(), split.compact.len());
    m.circle[idx] = k;
    FiniteTypeFunction::single(group, n, m, ExactScalar::one())
}

/// free^a bounded^b (with sign) in compact coordinate `idx`.
fn compact_power(
    group: Group,
    n: usize,
    split: &CoordSplit,
    idx: usize,
    free: u32,
    bounded: u32,
    negative: bool,
) -> FiniteTypeFunction {
    let mut m = EulerMonomial::unit(split.circle.len(), split.compact.len());
    m.compact[idx] = (free, bounded);
    let sign = if negative { -1 } else { 1 };
    FiniteTypeFunction::single(group, n, m, ExactScalar::from_rational(rat_i64(sign, 1)))
}

type SymMatrix = Vec<Vec<FiniteTypeFunction>>;

fn sym_identity(group: Group, n: usize) -> SymMatrix {
    (0..n)
        .map(|r| {
            (0..n)
                .map(|c| {
                    if r == c {
                        FiniteTypeFunction::one(group, n)
                    } else {
                        FiniteTypeFunction::zero(group, n)
                    }
                })
                .collect()
        })
        .collect()
}

fn sym_mul(a: &SymMatrix, b: &SymMatrix) -> Result<SymMatrix, FiniteTypeError> {
    let n = a.len();
    let mut out = Vec::with_capacity(n);
    for r in 0..n {
        let mut row = Vec::with_capacity(n);
        for c in 0..n {
            let mut acc = FiniteTypeFunction::zero(a[r][c].group, a[r][c].n);
            for (k, item) in b.iter().enumerate() {
                if a[r][k].is_zero() || item[c].is_zero() {
                    continue;
                }
                acc = acc.try_add(&a[r][k].try_mul(&item[c])?)?;
            }
            row.push(acc);
        }
        out.push(row);
    }
    Ok(out)
}

/// Find the circle-list position of a phi/omega coordinate by flat index.
fn circle_index(split: &CoordSplit, kind: CoordKind, flat: usize) -> usize {
    split
        .circle
        .iter()
        .position(|s| s.kind == kind && s.index == flat)
        .expect("coordinate is a circle coordinate")
}

fn compact_index(split: &CoordSplit, kind: CoordKind, flat: usize) -> usize {
    split
        .compact
        .iter()
        .position(|s| s.kind == kind && s.index == flat)
        .expect("coordinate is a compact coordinate")
}

/// The matrix of symbolic entries: each entry is the finite-type expansion of
/// the corresponding coordinate-map entry, built by multiplying the
/// factorization's elementary matrices symbolically.
pub fn symbolic_entries(group: Group, n: usize) -> Result<SymMatrix, FiniteTypeError> {
    if n < 2 {
        return Err(FiniteTypeError::RankTooSmall(n));
    }
    let split = coord_split(group, n);
    let mut m = sym_identity(group, n);
    match group {
        Group::Su => {
            // descending level blocks of phase/rotation pairs...
            for level in (2..=n).rev() {
                let off = crate::euler::level_offset(n, level);
                for k in 2..=level {
                    let phi_idx = circle_index(&split, CoordKind::Phi, off + k - 2);
                    let psi_idx = compact_index(&split, CoordKind::Psi, off + k - 2);
                    let mut phase = sym_identity(group, n);
                    phase[0][0] = circle_phase(group, n, &split, phi_idx, 1);
                    phase[1][1] = circle_phase(group, n, &split, phi_idx, -1);
                    let mut rot = sym_identity(group, n);
                    rot[0][0] = compact_power(group, n, &split, psi_idx, 0, 1, false);
                    rot[k - 1][k - 1] = compact_power(group, n, &split, psi_idx, 0, 1, false);
                    rot[0][k - 1] = compact_power(group, n, &split, psi_idx, 1, 0, false);
                    rot[k - 1][0] = compact_power(group, n, &split, psi_idx, 1, 0, true);
                    m = sym_mul(&m, &phase)?;
                    m = sym_mul(&m, &rot)?;
                }
            }
            // ...then ascending diagonal phase factors
            for level in 2..=n {
                let w_idx = circle_index(&split, CoordKind::Omega, level - 2);
                let mut w = sym_identity(group, n);
                for t in 0..level - 1 {
                    w[t][t] = circle_phase(group, n, &split, w_idx, 1);
                }
                w[level - 1][level - 1] =
                    circle_phase(group, n, &split, w_idx, -(level as i64 - 1));
                m = sym_mul(&m, &w)?;
            }
        }
        Group::So => {
            for level in (2..=n).rev() {
                let off = crate::euler::level_offset(n, level);
                for k in 1..level {
                    let mut rot = sym_identity(group, n);
                    if k == 1 {
                        // leading angle is a circle coordinate:
                        // cos = (z + z^-1)/2, sin = (z - z^-1)/(2i)
                        let c_idx = circle_index(&split, CoordKind::Phi, off);
                        let half = ExactScalar::from_rational(rat_i64(1, 2));
                        let cos = circle_phase(group, n, &split, c_idx, 1)
                            .try_add(&circle_phase(group, n, &split, c_idx, -1))?
                            .try_scale(&half)?;
                        // 1/(2i) = -i/2 = zeta(3/4)/2
                        let inv_2i = ExactScalar::root_of_unity(&rat_i64(3, 4))?
                            .try_mul(&half)?;
                        let sin = circle_phase(group, n, &split, c_idx, 1)
                            .try_sub(&circle_phase(group, n, &split, c_idx, -1))?
                            .try_scale(&inv_2i)?;
                        rot[0][0] = cos.clone();
                        rot[1][1] = cos;
                        rot[0][1] = sin.clone();
                        rot[1][0] = sin.try_scale(&ExactScalar::from_rational(rat_i64(-1, 1)))?;
                    } else {
                        let x_idx = compact_index(&split, CoordKind::Phi, off + k - 1);
                        rot[k - 1][k - 1] = compact_power(group, n, &split, x_idx, 1, 0, false);
                        rot[k][k] = compact_power(group, n, &split, x_idx, 1, 0, false);
                        rot[k - 1][k] = compact_power(group, n, &split, x_idx, 0, 1, false);
                        rot[k][k - 1] = compact_power(group, n, &split, x_idx, 0, 1, true);
                    }
                    m = sym_mul(&m, &rot)?;
                }
            }
        }
    }
    Ok(m)
}

/// Expand an entry polynomial into a finite-type function on the given group.
pub fn expand(
    p: &EntryPolynomial,
    group: Group,
    n: usize,
) -> Result<FiniteTypeFunction, FiniteTypeError> {
    let entries = symbolic_entries(group, n)?;
    let mut total = FiniteTypeFunction::zero(group, n);
    for term in &p.terms {
        let mut acc = FiniteTypeFunction::constant(group, n, term.coeff.clone());
        for f in &term.factors {
            if f.row == 0 || f.col == 0 || f.row > n || f.col > n {
                return Err(FiniteTypeError::EntryIndex {
                    row: f.row,
                    col: f.col,
                    n,
                });
            }
            let e = &entries[f.row - 1][f.col - 1];
            let e = if f.conj { e.conj() } else { e.clone() };
            acc = acc.try_mul(&e)?;
        }
        total = total.try_add(&acc)?;
    }
    total.normalize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::euler::{forward, random_interior};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn entries_match_forward() {
        let mut rng = StdRng::seed_from_u64(31);
        for n in 2..=4 {
            for group in [Group::Su, Group::So] {
                let entries = symbolic_entries(group, n).unwrap();
                for _ in 0..10 {
                    let a = random_interior(group, n, &mut rng);
                    let m = forward(&a);
                    for r in 0..n {
                        for c in 0..n {
                            assert!(
                                close(entries[r][c].eval(&a), m[(r, c)], 1e-12),
                                "{group}({n}) entry ({r},{c})"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn entry_term_counts_stay_small() {
        let su2 = symbolic_entries(Group::Su, 2).unwrap();
        assert_eq!(su2[0][0].num_terms(), 1);
        let su4 = symbolic_entries(Group::Su, 4).unwrap();
        let max_terms = su4.iter().flatten().map(|f| f.num_terms()).max().unwrap();
        assert!(max_terms <= 50, "su(4) entries blew up: {max_terms}");
    }

    #[test]
    fn unitarity_rows_expand_exactly() {
        for (group, n) in [(Group::Su, 2), (Group::Su, 3), (Group::So, 3)] {
            let entries = symbolic_entries(group, n).unwrap();
            for r in 0..n {
                for r2 in 0..n {
                    let mut acc = FiniteTypeFunction::zero(group, n);
                    for c in 0..n {
                        let prod = entries[r][c].try_mul(&entries[r2][c].conj()).unwrap();
                        acc = acc.try_add(&prod).unwrap();
                    }
                    let acc = acc.normalize().unwrap();
                    if r == r2 {
                        assert_eq!(acc, FiniteTypeFunction::one(group, n), "{group}({n}) row {r}");
                    } else {
                        assert!(acc.is_zero(), "{group}({n}) rows {r},{r2}");
                    }
                }
            }
        }
    }

    #[test]
    fn normalize_is_idempotent_and_preserves_eval() {
        let mut rng = StdRng::seed_from_u64(53);
        let entries = symbolic_entries(Group::Su, 3).unwrap();
        // squares create bounded powers >= 2 before normalization
        let f = entries[0][0]
            .try_mul(&entries[0][0])
            .unwrap()
            .try_mul(&entries[1][2].conj())
            .unwrap();
        let g = f.normalize().unwrap();
        assert_eq!(g, g.normalize().unwrap());
        for _ in 0..5 {
            let a = random_interior(Group::Su, 3, &mut rng);
            assert!(close(f.eval(&a), g.eval(&a), 1e-12));
        }
        for (m, _) in g.terms() {
            assert!(m.compact.iter().all(|&(_, b)| b <= 1));
        }
    }

    #[test]
    fn conjugate_matches_numeric_conjugate() {
        let mut rng = StdRng::seed_from_u64(71);
        for (group, n) in [(Group::Su, 2), (Group::Su, 3), (Group::So, 3)] {
            let entries = symbolic_entries(group, n).unwrap();
            let f = entries[0][1].try_mul(&entries[1][0]).unwrap();
            let fc = f.conj();
            for _ in 0..5 {
                let a = random_interior(group, n, &mut rng);
                assert!(close(fc.eval(&a), f.eval(&a).conj(), 1e-12));
            }
        }
    }

    #[test]
    fn expand_matches_entry_eval() {
        let mut rng = StdRng::seed_from_u64(97);
        let p = EntryPolynomial::parse("u11*cu22 - 1/3 u12^2 + 2").unwrap();
        for (group, n) in [(Group::Su, 2), (Group::Su, 3), (Group::So, 3)] {
            let f = expand(&p, group, n).unwrap();
            for _ in 0..10 {
                let a = random_interior(group, n, &mut rng);
                let m = forward(&a);
                assert!(
                    close(f.eval(&a), p.eval(&m), 1e-12),
                    "{group}({n})"
                );
            }
        }
    }

    #[test]
    fn parse_shorthand() {
        let p = EntryPolynomial::parse("u12").unwrap();
        assert_eq!(p.terms.len(), 1);
        assert_eq!(p.terms[0].factors.len(), 1);
        assert!(!p.terms[0].factors[0].conj);
        let p = EntryPolynomial::parse("-2/3 cu21 * u11^2 + 1").unwrap();
        assert_eq!(p.terms.len(), 2);
        assert_eq!(p.terms[0].factors.len(), 3);
        assert!(p.terms[0].factors[0].conj);
        assert!(p.terms[1].factors.is_empty());
        assert_eq!(p.degree(), 3);
        assert!(EntryPolynomial::parse("u1").is_none());
        assert!(EntryPolynomial::parse("").is_none());
        assert!(EntryPolynomial::parse("v11").is_none());
    }

    #[test]
    fn entry_poly_json_round_trip() {
        let p = EntryPolynomial::parse("1/2 u11*cu12 - u21").unwrap();
        let j = p.to_json();
        assert_eq!(EntryPolynomial::from_json(&j).unwrap(), p);
    }

    #[test]
    fn finite_type_json_round_trip() {
        let p = EntryPolynomial::parse("u11*u22 - 1/7 cu12").unwrap();
        let f = expand(&p, Group::Su, 2).unwrap();
        let j = f.to_json();
        let back = FiniteTypeFunction::from_json(Group::Su, 2, &j).unwrap();
        assert_eq!(f, back);
    }

    #[test]
    fn pow_and_guard() {
        let f = expand(&EntryPolynomial::parse("u11 + cu11").unwrap(), Group::Su, 2).unwrap();
        let p0 = f.try_pow(0).unwrap();
        assert_eq!(p0, FiniteTypeFunction::one(Group::Su, 2));
        let p3 = f.try_pow(3).unwrap();
        let mut rng = StdRng::seed_from_u64(3);
        let a = random_interior(Group::Su, 2, &mut rng);
        assert!(close(p3.eval(&a), f.eval(&a).powu(3), 1e-12));
        // mismatched operands are rejected
        let g = FiniteTypeFunction::one(Group::Su, 3);
        assert!(matches!(f.try_add(&g), Err(FiniteTypeError::Mismatch)));
    }

    #[test]
    fn random_entry_polys_expand_and_eval() {
        let mut rng = StdRng::seed_from_u64(113);
        for (group, n) in [(Group::Su, 2), (Group::Su, 3), (Group::So, 3)] {
            for _ in 0..10 {
                let deg = rng.gen_range(1..=2);
                let mut terms = Vec::new();
                for _ in 0..rng.gen_range(1..=3) {
                    let factors: Vec<EntryFactor> = (0..deg)
                        .map(|_| EntryFactor {
                            row: rng.gen_range(1..=n),
                            col: rng.gen_range(1..=n),
                            conj: rng.gen_bool(0.5),
                        })
                        .collect();
                    terms.push(EntryTerm {
                        coeff: ExactScalar::from_rational(rat_i64(rng.gen_range(-3..=3), 1)),
                        factors,
                    });
                }
                let p = EntryPolynomial { terms };
                let f = expand(&p, group, n).unwrap();
                let a = random_interior(group, n, &mut rng);
                assert!(close(f.eval(&a), p.eval(&forward(&a)), 1e-11), "{group}({n})");
            }
        }
    }
}
