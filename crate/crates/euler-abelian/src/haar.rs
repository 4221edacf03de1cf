//! Haar measure in the factorized coordinates: densities, exact
//! normalization constants, samplers, integrators, and a finite-difference
//! Jacobian oracle for the density formula.

use crate::euler::{
    coordinate_specs, forward, CoordKind, CoordRole, CoordinateSpec, EulerAngles, Group,
};
use crate::exact::{rat_int, ExactScalar, Int, Rational};
use crate::generators::CMatrix;
use num_complex::Complex64;
use num_traits::One;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HaarError {
    #[error("rank {n} above the configured maximum {max}")]
    RankTooLarge { n: usize, max: usize },
    #[error("rank must be at least 2, got {0}")]
    RankTooSmall(usize),
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(u64),
    #[error("group dimension {dim} exceeds quadrature limit {max}")]
    DimensionTooLarge { dim: usize, max: usize },
    #[error("orders list has {got} entries, expected 1 or {want}")]
    OrdersMismatch { got: usize, want: usize },
    #[error("quadrature order must be at least 1")]
    ZeroOrder,
    #[error("angles too close to the coordinate boundary for a stable Jacobian")]
    NearBoundary,
    #[error("metric determinant not positive; input too close to singular")]
    SingularMetric,
}

/// Highest rank `normalization` evaluates by default.
pub const MAX_NORMALIZATION_RANK: usize = 6;

/// Largest group dimension `quad_integrate` accepts.
pub const MAX_QUAD_DIM: usize = 8;

/// Number of coordinates (= group dimension).
pub fn group_dim(group: Group, n: usize) -> usize {
    match group {
        Group::Su => n * n - 1,
        Group::So => n * (n - 1) / 2,
    }
}

/// Unnormalized Haar density in the factorized coordinates: per level a
/// product of sine/cosine powers in the compact angles; circle angles carry
/// uniform weight.
pub fn density(group: Group, n: usize, a: &EulerAngles) -> f64 {
    let mut d = 1.0;
    for spec in coordinate_specs(group, n) {
        d *= coord_density(group, &spec, coord_value(a, &spec));
    }
    d
}

fn coord_value(a: &EulerAngles, spec: &CoordinateSpec) -> f64 {
    match spec.kind {
        CoordKind::Phi => a.phi[spec.index],
        CoordKind::Psi => a.psi[spec.index],
        CoordKind::Omega => a.omega[spec.index],
    }
}

fn set_coord(a: &mut EulerAngles, spec: &CoordinateSpec, v: f64) {
    match spec.kind {
        CoordKind::Phi => a.phi[spec.index] = v,
        CoordKind::Psi => a.psi[spec.index] = v,
        CoordKind::Omega => a.omega[spec.index] = v,
    }
}

/// Density factor carried by a single coordinate.
fn coord_density(group: Group, spec: &CoordinateSpec, v: f64) -> f64 {
    match (group, spec.kind) {
        (Group::Su, CoordKind::Psi) => {
            let r = spec.level;
            if spec.pos == r - 2 {
                // level-closing angle
                v.cos() * v.sin().powi(2 * r as i32 - 3)
            } else {
                let j = spec.pos as i32 + 1;
                v.cos().powi(2 * j - 1) * v.sin()
            }
        }
        (Group::So, CoordKind::Phi) if spec.pos > 0 => v.sin().powi(spec.pos as i32),
        _ => 1.0,
    }
}

/// Exact value of int_0^{pi/2} sin^m cos^n.
pub(crate) fn wallis_exact(m: u64, n: u64) -> ExactScalar {
    let mut coef = Rational::one();
    let mut nn = n;
    while nn >= 2 {
        coef *= Rational::new(Int::from(nn - 1), Int::from(m + nn));
        nn -= 2;
    }
    if nn == 1 {
        coef *= Rational::new(Int::from(1), Int::from(m + 1));
        return ExactScalar::from_rational(coef);
    }
    let mut k = m;
    while k >= 2 {
        coef *= Rational::new(Int::from(k - 1), Int::from(k));
        k -= 2;
    }
    if m % 2 == 0 {
        ExactScalar::pi_term(
            1,
            crate::exact::CyclotomicNumber::from_rational(coef / rat_int(2)),
        )
    } else {
        ExactScalar::from_rational(coef)
    }
}

fn factorial(n: u64) -> Rational {
    let mut f = Int::one();
    for k in 2..=n {
        f *= Int::from(k);
    }
    Rational::from_integer(f)
}

fn double_factorial(n: u64) -> Rational {
    let mut f = Int::one();
    let mut k = n;
    while k >= 2 {
        f *= Int::from(k);
        k -= 2;
    }
    Rational::from_integer(f)
}

/// Exact symbolic integral of one level's density factor over its domain.
/// Multiplying by the computed normalization constant gives exactly one.
pub fn level_mass_exact(group: Group, level: usize) -> ExactScalar {
    let r = level as u64;
    let pi = ExactScalar::pi_term(1, crate::exact::CyclotomicNumber::one());
    match group {
        Group::Su => {
            // leading phi over [0,pi], r-2 others over [0,2pi],
            // omega over [0,2pi/(r-1)], then the psi integrals
            let mut mass = pi.clone();
            for _ in 0..r - 2 {
                mass = mass.try_mul(&pi).unwrap().scale(&rat_int(2));
            }
            mass = mass
                .try_mul(&pi)
                .unwrap()
                .scale(&(rat_int(2) / Rational::from_integer(Int::from(r - 1))));
            for j in 1..=r - 2 {
                mass = mass.try_mul(&wallis_exact(1, 2 * j - 1)).unwrap();
            }
            mass.try_mul(&wallis_exact(2 * r - 3, 1)).unwrap()
        }
        Group::So => {
            let mut mass = pi.scale(&rat_int(2));
            for j in 2..r {
                // int_0^pi sin^{j-1} = 2 W(j-1, 0)
                mass = mass
                    .try_mul(&wallis_exact(j - 1, 0))
                    .unwrap()
                    .scale(&rat_int(2));
            }
            mass
        }
    }
}

/// Closed-form per-level normalization constant (reciprocal of the level
/// mass), derived independently of the symbolic integration path.
pub(crate) fn computed_constant(group: Group, level: usize) -> ExactScalar {
    let r = level as u64;
    match group {
        Group::Su => {
            let c = factorial(r - 1) * Rational::from_integer(Int::from(r - 1));
            ExactScalar::pi_term(
                -(r as i64),
                crate::exact::CyclotomicNumber::from_rational(c),
            )
        }
        Group::So => {
            if r % 2 == 0 {
                let c = factorial(r / 2 - 1) / rat_int(2);
                ExactScalar::pi_term(
                    -((r / 2) as i64),
                    crate::exact::CyclotomicNumber::from_rational(c),
                )
            } else {
                let c = double_factorial(r - 2)
                    / Rational::from_integer(Int::from(2u64).pow(((r + 1) / 2) as u32));
                ExactScalar::pi_term(
                    -(((r - 1) / 2) as i64),
                    crate::exact::CyclotomicNumber::from_rational(c),
                )
            }
        }
    }
}

/// The published per-level constant, kept verbatim for the audit ratio.
pub(crate) fn published_constant(group: Group, level: usize) -> ExactScalar {
    let r = level as u64;
    match group {
        Group::Su => {
            let c = factorial(r - 1) * Rational::from_integer(Int::from(r - 1)) / rat_int(2);
            ExactScalar::pi_term(
                -(r as i64),
                crate::exact::CyclotomicNumber::from_rational(c),
            )
        }
        // Gamma(r/2) / (2 pi^{r/2}) in closed form
        Group::So => computed_constant(group, level),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelNormalization {
    pub level: usize,
    pub computed: ExactScalar,
    pub published: ExactScalar,
    /// computed / published, exact.
    pub ratio: ExactScalar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationReport {
    pub group: Group,
    pub n: usize,
    pub levels: Vec<LevelNormalization>,
    pub total_computed: ExactScalar,
    pub total_published: ExactScalar,
    pub total_ratio: ExactScalar,
}

/// Exact normalization constants per recursion level, with the published
/// values and their exact ratios attached for audit.
pub fn normalization(group: Group, n: usize) -> Result<NormalizationReport, HaarError> {
    if n < 2 {
        return Err(HaarError::RankTooSmall(n));
    }
    if n > MAX_NORMALIZATION_RANK {
        return Err(HaarError::RankTooLarge {
            n,
            max: MAX_NORMALIZATION_RANK,
        });
    }
    let mut levels = Vec::new();
    let mut total_computed = ExactScalar::one();
    let mut total_published = ExactScalar::one();
    for level in 2..=n {
        let computed = computed_constant(group, level);
        let published = published_constant(group, level);
        let ratio = computed.try_div(&published).expect("published is a pi-term");
        total_computed = total_computed.try_mul(&computed).unwrap();
        total_published = total_published.try_mul(&published).unwrap();
        levels.push(LevelNormalization {
            level,
            computed,
            published,
            ratio,
        });
    }
    let total_ratio = total_computed
        .try_div(&total_published)
        .expect("published is a pi-term");
    Ok(NormalizationReport {
        group,
        n,
        levels,
        total_computed,
        total_published,
        total_ratio,
    })
}

#[derive(Debug, Clone)]
pub struct HaarDensity {
    pub group: Group,
    pub n: usize,
    /// Product of computed per-level constants: 1 / (exact domain integral).
    pub normalization: ExactScalar,
}

impl HaarDensity {
    pub fn new(group: Group, n: usize) -> Result<Self, HaarError> {
        let report = normalization(group, n)?;
        Ok(Self {
            group,
            n,
            normalization: report.total_computed,
        })
    }

    /// Unnormalized density at the given angles.
    pub fn eval(&self, a: &EulerAngles) -> f64 {
        density(self.group, self.n, a)
    }
}

/// One exact Haar draw: circle angles uniform, compact angles by inverse-CDF
/// (SU) or rejection (SO).
pub fn sample<R: Rng + ?Sized>(group: Group, n: usize, rng: &mut R) -> EulerAngles {
    let mut a = EulerAngles::zeros(group, n).expect("sample called with rank >= 2");
    for spec in coordinate_specs(group, n) {
        let v = match (group, spec.kind, spec.role) {
            (_, _, CoordRole::Circle { .. }) => rng.gen_range(spec.lo..spec.hi),
            (Group::Su, CoordKind::Psi, _) => {
                let u: f64 = rng.gen();
                let r = spec.level;
                if spec.pos == r - 2 {
                    u.powf(1.0 / (2.0 * r as f64 - 2.0)).asin()
                } else {
                    let j = spec.pos as f64 + 1.0;
                    (1.0 - u).powf(1.0 / (2.0 * j)).acos()
                }
            }
            (Group::So, CoordKind::Phi, _) => {
                // density sin^pos on [0, pi]; rejection from uniform
                let p = spec.pos as i32;
                loop {
                    let x = rng.gen_range(0.0..PI);
                    if rng.gen::<f64>() <= x.sin().powi(p) {
                        break x;
                    }
                }
            }
            _ => unreachable!("no other coordinate roles exist"),
        };
        set_coord(&mut a, &spec, v);
    }
    a
}

const MC_CHUNK: u64 = 8192;

/// Monte Carlo Haar integral of `f` with standard error. Deterministic for a
/// given seed: sub-streams are seeded independently by chunk index and merged
/// in index order regardless of scheduling.
pub fn mc_integrate<F>(
    f: F,
    group: Group,
    n: usize,
    samples: u64,
    seed: u64,
) -> Result<(Complex64, f64), HaarError>
where
    F: Fn(&EulerAngles) -> Complex64 + Sync,
{
    if n < 2 {
        return Err(HaarError::RankTooSmall(n));
    }
    if samples < 2 {
        return Err(HaarError::TooFewSamples(samples));
    }
    let chunks = samples.div_ceil(MC_CHUNK);
    let partials: Vec<(Complex64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let count = MC_CHUNK.min(samples - c * MC_CHUNK);
            let mut sum = Complex64::new(0.0, 0.0);
            let mut sumsq = 0.0;
            for _ in 0..count {
                let a = sample(group, n, &mut rng);
                let v = f(&a);
                sum += v;
                sumsq += v.norm_sqr();
            }
            (sum, sumsq)
        })
        .collect();
    let mut sum = Complex64::new(0.0, 0.0);
    let mut sumsq = 0.0;
    for (s, sq) in partials {
        sum += s;
        sumsq += sq;
    }
    let nf = samples as f64;
    let mean = sum / nf;
    let var = (sumsq / nf - mean.norm_sqr()).max(0.0);
    Ok((mean, (var / nf).sqrt()))
}

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // evaluate P_n and P_n' by upward recurrence
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        weights[i] = w;
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn is_full_period(spec: &CoordinateSpec) -> bool {
    matches!(spec.role, CoordRole::Circle { .. }) && (spec.hi - spec.lo - 2.0 * PI).abs() < 1e-12
}

/// Tensor-product quadrature of `f` against the normalized Haar density.
/// Full-period circle coordinates get the trapezoid rule (spectrally accurate
/// there); range-restricted coordinates get Gauss-Legendre. `orders` is one
/// entry per coordinate, or a single entry broadcast to all.
pub fn quad_integrate<F>(
    f: F,
    group: Group,
    n: usize,
    orders: &[usize],
) -> Result<Complex64, HaarError>
where
    F: Fn(&EulerAngles) -> Complex64,
{
    if n < 2 {
        return Err(HaarError::RankTooSmall(n));
    }
    let specs = coordinate_specs(group, n);
    let dim = specs.len();
    if dim > MAX_QUAD_DIM {
        return Err(HaarError::DimensionTooLarge {
            dim,
            max: MAX_QUAD_DIM,
        });
    }
    let per_dim: Vec<usize> = if orders.len() == 1 {
        vec![orders[0]; dim]
    } else if orders.len() == dim {
        orders.to_vec()
    } else {
        return Err(HaarError::OrdersMismatch {
            got: orders.len(),
            want: dim,
        });
    };
    if per_dim.iter().any(|&o| o == 0) {
        return Err(HaarError::ZeroOrder);
    }

    // per-coordinate nodes and weights, density folded into the weight
    let mut grids: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(dim);
    for (spec, &order) in specs.iter().zip(&per_dim) {
        let (mut xs, mut ws) = if is_full_period(spec) {
            let m = order;
            let h = (spec.hi - spec.lo) / m as f64;
            let xs: Vec<f64> = (0..=m).map(|i| spec.lo + i as f64 * h).collect();
            let ws: Vec<f64> = (0..=m)
                .map(|i| if i == 0 || i == m { h / 2.0 } else { h })
                .collect();
            (xs, ws)
        } else {
            let (t, w) = gauss_legendre(order);
            let half = (spec.hi - spec.lo) / 2.0;
            let mid = (spec.hi + spec.lo) / 2.0;
            (
                t.iter().map(|x| mid + half * x).collect(),
                w.iter().map(|x| x * half).collect(),
            )
        };
        for (x, w) in xs.iter_mut().zip(ws.iter_mut()) {
            *w *= coord_density(group, spec, *x);
            let _ = x;
        }
        grids.push((xs, ws));
    }

    let norm = normalization(group, n)?
        .total_computed
        .to_complex(10)
        .expect("normalization constant embeds exactly")
        .0;

    let mut angles = EulerAngles::zeros(group, n).expect("rank checked");
    let mut idx = vec![0usize; dim];
    for (d, spec) in specs.iter().enumerate() {
        set_coord(&mut angles, spec, grids[d].0[0]);
    }
    let mut total = Complex64::new(0.0, 0.0);
    'outer: loop {
        let mut w = 1.0;
        for d in 0..dim {
            w *= grids[d].1[idx[d]];
        }
        if w != 0.0 {
            total += f(&angles) * w;
        }
        // odometer increment
        for d in 0..dim {
            idx[d] += 1;
            if idx[d] < grids[d].0.len() {
                set_coord(&mut angles, &specs[d], grids[d].0[idx[d]]);
                continue 'outer;
            }
            idx[d] = 0;
            set_coord(&mut angles, &specs[d], grids[d].0[0]);
        }
        break;
    }
    Ok(total * norm)
}

/// Margin inside which the finite-difference metric is considered unsafe.
const JACOBIAN_MARGIN: f64 = 1e-3;

/// Left-invariant metric volume sqrt(det M) at the given interior angles,
/// M_ab = -(1/2) Re Tr[(F^-1 dF/da)(F^-1 dF/db)], by Richardson-combined
/// central differences. Its ratio to `density` is angle-independent.
pub fn density_from_jacobian(
    group: Group,
    n: usize,
    a: &EulerAngles,
) -> Result<f64, HaarError> {
    let specs = coordinate_specs(group, n);
    for spec in &specs {
        let v = coord_value(a, spec);
        if v < spec.lo + JACOBIAN_MARGIN || v > spec.hi - JACOBIAN_MARGIN {
            return Err(HaarError::NearBoundary);
        }
    }
    let dim = specs.len();
    let f0 = forward(a);
    let finv = f0.adjoint();
    let h = 1e-5;

    let deriv = |spec: &CoordinateSpec, step: f64| -> CMatrix {
        let mut hi = a.clone();
        set_coord(&mut hi, spec, coord_value(a, spec) + step);
        let mut lo = a.clone();
        set_coord(&mut lo, spec, coord_value(a, spec) - step);
        (forward(&hi) - forward(&lo)) / Complex64::new(2.0 * step, 0.0)
    };

    let mut currents: Vec<CMatrix> = Vec::with_capacity(dim);
    for spec in &specs {
        let d1 = deriv(spec, h);
        let d2 = deriv(spec, h / 2.0);
        // Richardson: error h^2 terms cancel
        let d = d2.map(|z| z * (4.0 / 3.0)) - d1.map(|z| z / 3.0);
        currents.push(&finv * d);
    }

    let mut m = nalgebra::DMatrix::<f64>::zeros(dim, dim);
    for i in 0..dim {
        for j in i..dim {
            let t = -(0.5) * (&currents[i] * &currents[j]).trace().re;
            m[(i, j)] = t;
            m[(j, i)] = t;
        }
    }
    let det = m.determinant();
    if !det.is_finite() || det <= 0.0 {
        return Err(HaarError::SingularMetric);
    }
    Ok(det.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::euler::{inverse, random_interior};
    use rand::rngs::StdRng;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn density_examples() {
        let a = EulerAngles::new(Group::Su, 2, vec![0.3], vec![FRAC_PI_4], vec![1.0]).unwrap();
        assert!((density(Group::Su, 2, &a) - 0.5).abs() < 1e-15);
        let b = EulerAngles::new(
            Group::So,
            3,
            vec![0.7, std::f64::consts::FRAC_PI_2, 0.2],
            vec![],
            vec![],
        )
        .unwrap();
        assert!((density(Group::So, 3, &b) - 1.0).abs() < 1e-15);
        // all compact angles at zero kill the density
        let z = EulerAngles::zeros(Group::Su, 3).unwrap();
        assert_eq!(density(Group::Su, 3, &z), 0.0);
    }

    #[test]
    fn wallis_values() {
        let half_pi = ExactScalar::pi_term(
            1,
            crate::exact::CyclotomicNumber::from_rational(crate::exact::rat_i64(1, 2)),
        );
        assert_eq!(wallis_exact(0, 0), half_pi);
        assert_eq!(
            wallis_exact(1, 1),
            ExactScalar::from_rational(crate::exact::rat_i64(1, 2))
        );
        assert_eq!(
            wallis_exact(3, 0),
            ExactScalar::from_rational(crate::exact::rat_i64(2, 3))
        );
        assert_eq!(
            wallis_exact(1, 3),
            ExactScalar::from_rational(crate::exact::rat_i64(1, 4))
        );
        // int sin^2 = pi/4
        let quarter_pi = ExactScalar::pi_term(
            1,
            crate::exact::CyclotomicNumber::from_rational(crate::exact::rat_i64(1, 4)),
        );
        assert_eq!(wallis_exact(2, 0), quarter_pi);
    }

    #[test]
    fn normalization_is_exact() {
        for n in 2..=4 {
            let report = normalization(Group::Su, n).unwrap();
            for lvl in &report.levels {
                let mass = level_mass_exact(Group::Su, lvl.level);
                assert!(
                    lvl.computed.try_mul(&mass).unwrap().is_one(),
                    "su level {}",
                    lvl.level
                );
                assert_eq!(lvl.ratio, ExactScalar::from_rational(rat_int(2)));
            }
        }
        for n in 2..=5 {
            let report = normalization(Group::So, n).unwrap();
            for lvl in &report.levels {
                let mass = level_mass_exact(Group::So, lvl.level);
                assert!(
                    lvl.computed.try_mul(&mass).unwrap().is_one(),
                    "so level {}",
                    lvl.level
                );
                assert!(lvl.ratio.is_one());
            }
        }
        // frozen: so(2) constant is 1/(2 pi)
        let so2 = normalization(Group::So, 2).unwrap();
        let half_inv_pi = ExactScalar::pi_term(
            -1,
            crate::exact::CyclotomicNumber::from_rational(crate::exact::rat_i64(1, 2)),
        );
        assert_eq!(so2.total_computed, half_inv_pi);
        assert!(normalization(Group::Su, 7).is_err());
    }

    #[test]
    fn sampler_moments() {
        let mut rng = StdRng::seed_from_u64(42);
        let samples = 100_000;
        // E[sin^2 psi_last] = (N-1)/N at the top level
        for n in 2..=3 {
            let mut acc = 0.0;
            for _ in 0..samples {
                let a = sample(Group::Su, n, &mut rng);
                acc += a.psi[n - 2].sin().powi(2);
            }
            let mean = acc / samples as f64;
            let expect = (n as f64 - 1.0) / n as f64;
            // Var(sin^2) <= 1/4, so sigma <= 0.5/sqrt(samples)
            let sigma = 0.5 / (samples as f64).sqrt();
            assert!(
                (mean - expect).abs() < 4.0 * sigma,
                "su({n}): {mean} vs {expect}"
            );
        }
        // E[cos phi_2] = 0 on so(3) by symmetry
        let mut acc = 0.0;
        for _ in 0..samples {
            let a = sample(Group::So, 3, &mut rng);
            acc += a.phi[1].cos();
        }
        let sigma = 1.0 / (samples as f64).sqrt();
        assert!((acc / samples as f64).abs() < 4.0 * sigma);
    }

    #[test]
    fn haar_samples_invert() {
        // surjectivity smoke test: sampled matrices land in the coordinate
        // domain and round-trip through the inverse
        let mut rng = StdRng::seed_from_u64(5);
        for (group, n, count) in [
            (Group::Su, 2, 400),
            (Group::Su, 3, 300),
            (Group::So, 3, 300),
        ] {
            for _ in 0..count {
                let a = sample(group, n, &mut rng);
                let m = forward(&a);
                let b = inverse(group, n, &m).unwrap();
                assert!(b.range_warnings().is_empty(), "{group}({n})");
                let diff = (&m - forward(&b))
                    .iter()
                    .map(|z| z.norm())
                    .fold(0.0, f64::max);
                assert!(diff < 1e-9, "{group}({n})");
            }
        }
    }

    #[test]
    fn mc_constant_is_exact() {
        let (est, err) = mc_integrate(
            |_| Complex64::new(1.0, 0.0),
            Group::Su,
            2,
            10_000,
            0,
        )
        .unwrap();
        assert!((est - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!(err < 1e-7);
    }

    #[test]
    fn mc_schur_moments() {
        // E[u11] = 0 and E[|u11|^2] = 1/N
        for (group, n) in [(Group::Su, 2), (Group::Su, 3), (Group::So, 3)] {
            let (est, err) =
                mc_integrate(|a| forward(a)[(0, 0)], group, n, 100_000, 1).unwrap();
            assert!(est.norm() < 4.0 * err.max(1e-10), "{group}({n}) mean entry");
            let (est2, err2) = mc_integrate(
                |a| Complex64::new(forward(a)[(0, 0)].norm_sqr(), 0.0),
                group,
                n,
                100_000,
                2,
            )
            .unwrap();
            assert!(
                (est2.re - 1.0 / n as f64).abs() < 4.0 * err2,
                "{group}({n}) |u11|^2: {} vs {}",
                est2.re,
                1.0 / n as f64
            );
        }
    }

    #[test]
    fn mc_is_deterministic() {
        let f = |a: &EulerAngles| forward(a)[(0, 1)];
        let r1 = mc_integrate(f, Group::Su, 3, 30_000, 9).unwrap();
        let r2 = mc_integrate(f, Group::Su, 3, 30_000, 9).unwrap();
        assert_eq!(r1.0, r2.0);
        assert_eq!(r1.1, r2.1);
        let r3 = mc_integrate(f, Group::Su, 3, 30_000, 10).unwrap();
        assert_ne!(r1.0, r3.0);
        assert!(matches!(
            mc_integrate(f, Group::Su, 3, 1, 0),
            Err(HaarError::TooFewSamples(1))
        ));
    }

    #[test]
    fn mc_left_right_invariance() {
        let mut rng = StdRng::seed_from_u64(77);
        let y = forward(&sample(Group::Su, 2, &mut rng));
        let f = |m: &CMatrix| m[(0, 0)] * m[(1, 1)] + m[(0, 1)].conj();
        let (base, e1) = mc_integrate(|a| f(&forward(a)), Group::Su, 2, 80_000, 3).unwrap();
        let yl = y.clone();
        let (left, e2) =
            mc_integrate(move |a| f(&(&yl * forward(a))), Group::Su, 2, 80_000, 4).unwrap();
        let (right, e3) =
            mc_integrate(move |a| f(&(forward(a) * &y)), Group::Su, 2, 80_000, 5).unwrap();
        let tol = 5.0 * (e1 + e2);
        assert!((base - left).norm() < tol, "left: {base} vs {left}");
        assert!((base - right).norm() < 5.0 * (e1 + e3));
    }

    #[test]
    fn quad_exactness_low_rank() {
        // constant integrates to exactly 1
        let one = quad_integrate(
            |_| Complex64::new(1.0, 0.0),
            Group::Su,
            2,
            &[16, 16, 16],
        )
        .unwrap();
        assert!((one - Complex64::new(1.0, 0.0)).norm() < 1e-10);
        // |u11|^2 -> 1/2, |u11|^4 -> 1/3
        let m2 = quad_integrate(
            |a| Complex64::new(forward(a)[(0, 0)].norm_sqr(), 0.0),
            Group::Su,
            2,
            &[24, 20, 8],
        )
        .unwrap();
        assert!((m2.re - 0.5).abs() < 1e-8, "{}", m2.re);
        let m4 = quad_integrate(
            |a| Complex64::new(forward(a)[(0, 0)].norm_sqr().powi(2), 0.0),
            Group::Su,
            2,
            &[24, 20, 8],
        )
        .unwrap();
        assert!((m4.re - 1.0 / 3.0).abs() < 1e-8, "{}", m4.re);
        // so(3): E[R11^2] = 1/3
        let so = quad_integrate(
            |a| Complex64::new(forward(a)[(0, 0)].re.powi(2), 0.0),
            Group::So,
            3,
            &[20, 20, 20],
        )
        .unwrap();
        assert!((so.re - 1.0 / 3.0).abs() < 1e-8, "{}", so.re);
        // dimension guard: su(4) has 15 coordinates
        assert!(matches!(
            quad_integrate(|_| Complex64::new(1.0, 0.0), Group::Su, 4, &[4]),
            Err(HaarError::DimensionTooLarge { .. })
        ));
        assert!(matches!(
            quad_integrate(|_| Complex64::new(1.0, 0.0), Group::Su, 2, &[4, 4]),
            Err(HaarError::OrdersMismatch { .. })
        ));
    }

    #[test]
    fn quad_agrees_with_mc_on_su3() {
        // a degree-4 entry polynomial with a nonzero Haar mean
        let f = |a: &EulerAngles| {
            let m = forward(a);
            m[(0, 0)] * m[(1, 1)] * m[(0, 0)].conj() * m[(1, 1)].conj()
                + m[(0, 1)] * m[(1, 0)].conj()
        };
        let (mc, err) = mc_integrate(f, Group::Su, 3, 20_000, 6).unwrap();
        // leading phi / short omega coordinates are range-restricted: GL;
        // full-period ones: trapezoid
        let orders = [8, 6, 8, 6, 6, 6, 6, 10];
        let quad = quad_integrate(f, Group::Su, 3, &orders).unwrap();
        assert!(
            (mc - quad).norm() < 4.0 * err,
            "mc {mc} vs quad {quad}, 4 sigma = {}",
            4.0 * err
        );
    }

    #[test]
    fn jacobian_ratio_is_constant() {
        let mut rng = StdRng::seed_from_u64(13);
        for (group, n, expect) in [
            (Group::Su, 2, Some(2.0)),
            (Group::Su, 3, None),
            (Group::So, 3, Some(1.0)),
            (Group::So, 4, Some(1.0)),
        ] {
            let mut ratios = Vec::new();
            for _ in 0..10 {
                let a = random_interior(group, n, &mut rng);
                let j = density_from_jacobian(group, n, &a).unwrap();
                ratios.push(j / density(group, n, &a));
            }
            let mean: f64 = ratios.iter().sum::<f64>() / ratios.len() as f64;
            for r in &ratios {
                assert!(
                    ((r - mean) / mean).abs() < 1e-4,
                    "{group}({n}) spread: {ratios:?}"
                );
            }
            if let Some(e) = expect {
                assert!((mean - e).abs() < 1e-6, "{group}({n}): {mean}");
            }
        }
    }

    #[test]
    fn jacobian_rejects_boundary() {
        let a = EulerAngles::zeros(Group::Su, 2).unwrap();
        assert!(matches!(
            density_from_jacobian(Group::Su, 2, &a),
            Err(HaarError::NearBoundary)
        ));
    }

    #[test]
    fn gauss_legendre_rule() {
        let (x, w) = gauss_legendre(6);
        // integrates degree <= 11 exactly: x^10 over [-1,1] = 2/11
        let int: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        assert!((int - 2.0 / 11.0).abs() < 1e-13);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-13);
    }
}
