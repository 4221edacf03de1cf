//! Generator basis of su(N) (anti-Hermitian convention) and the closed-form
//! exponentials used by the factorized coordinates.
//!
//! Index layout: for each band j = 1..N-1 the indices j^2-1+k, k = 1..2j,
//! couple subspace row j+1 to the earlier rows (odd k symmetric-imaginary,
//! even k antisymmetric-real), and index (j+1)^2-1 is the diagonal generator
//! closing the band.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde_json::{json, Value};
use thiserror::Error;

pub type CMatrix = DMatrix<Complex64>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeneratorError {
    #[error("generator index {j} out of range for dimension {n}")]
    IndexOutOfRange { n: usize, j: usize },
    #[error("no closed-form exponential for generator index {j} in dimension {n}")]
    UnsupportedIndex { n: usize, j: usize },
    #[error("invalid index combination: relation {relation} with p={p}, q={q}, n={n}")]
    InvalidCombination {
        relation: u8,
        p: usize,
        q: usize,
        n: usize,
    },
}

const I: Complex64 = Complex64::new(0.0, 1.0);

/// The basis generator lambda_j of su(N), 1 <= j <= N^2-1.
pub fn lambda(n: usize, j: usize) -> Result<CMatrix, GeneratorError> {
    if n < 2 || j < 1 || j > n * n - 1 {
        return Err(GeneratorError::IndexOutOfRange { n, j });
    }
    let band = (1..n).find(|b| j <= (b + 1) * (b + 1) - 1).expect("j in range");
    let mut m = CMatrix::zeros(n, n);
    if j == (band + 1) * (band + 1) - 1 {
        for t in 0..band {
            m[(t, t)] = I;
        }
        m[(band, band)] = -I * band as f64;
        return Ok(m);
    }
    let k = j - (band * band - 1);
    if k % 2 == 1 {
        let p = k.div_ceil(2) - 1;
        m[(p, band)] = I;
        m[(band, p)] = I;
    } else {
        let p = k / 2 - 1;
        m[(p, band)] = Complex64::new(1.0, 0.0);
        m[(band, p)] = Complex64::new(-1.0, 0.0);
    }
    Ok(m)
}

/// diag(e^{it}, e^{-it}, 1, ..., 1) = exp(t lambda_3).
pub(crate) fn phase3(n: usize, t: f64) -> CMatrix {
    let mut m = CMatrix::identity(n, n);
    m[(0, 0)] = (I * t).exp();
    m[(1, 1)] = (-I * t).exp();
    m
}

/// diag(e^{it} x (n-1), e^{-i(n-1)t}) = exp(t lambda_{n^2-1}).
pub(crate) fn omega_phase(n: usize, t: f64) -> CMatrix {
    let mut m = CMatrix::identity(n, n);
    for k in 0..n - 1 {
        m[(k, k)] = (I * t).exp();
    }
    m[(n - 1, n - 1)] = (-I * (n as f64 - 1.0) * t).exp();
    m
}

/// Plane rotation by t in rows/columns (a, b), 0-based: +sin at (a, b).
pub(crate) fn plane_rotation(n: usize, a: usize, b: usize, t: f64) -> CMatrix {
    let mut m = CMatrix::identity(n, n);
    let (c, s) = (t.cos(), t.sin());
    m[(a, a)] = Complex64::new(c, 0.0);
    m[(b, b)] = Complex64::new(c, 0.0);
    m[(a, b)] = Complex64::new(s, 0.0);
    m[(b, a)] = Complex64::new(-s, 0.0);
    m
}

/// exp(t lambda_j) in closed form. Supported indices: 3, k^2+1 for
/// 1 <= k <= N-1, and N^2-1.
pub fn exp_generator(n: usize, j: usize, t: f64) -> Result<CMatrix, GeneratorError> {
    if n < 2 || j < 1 || j > n * n - 1 {
        return Err(GeneratorError::IndexOutOfRange { n, j });
    }
    if j == n * n - 1 {
        return Ok(omega_phase(n, t));
    }
    if j == 3 {
        return Ok(phase3(n, t));
    }
    for k in 1..n {
        if j == k * k + 1 {
            return Ok(plane_rotation(n, 0, k, t));
        }
    }
    Err(GeneratorError::UnsupportedIndex { n, j })
}

/// Tr(lambda_j lambda_k); real for this basis.
pub fn trace_pairing(n: usize, j: usize, k: usize) -> Result<f64, GeneratorError> {
    let a = lambda(n, j)?;
    let b = lambda(n, k)?;
    Ok((&a * &b).trace().re)
}

fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn adjoint(x: &CMatrix, y: &CMatrix) -> CMatrix {
    x * y * x.adjoint()
}

/// Residual of one of the four adjoint-action identities relating the
/// one-parameter subgroups of lambda_3 and the plane rotations to the band
/// generators. `angles = (phi, psi)`; relations 1 and 2 ignore `p` and `psi`
/// is unused by relation 1.
pub fn ad_relation_residual(
    relation: u8,
    p: usize,
    q: usize,
    n: usize,
    angles: (f64, f64),
) -> Result<f64, GeneratorError> {
    let (phi, psi) = angles;
    let bad = GeneratorError::InvalidCombination { relation, p, q, n };
    match relation {
        1 | 2 => {
            if q < 2 || n < q + 1 {
                return Err(bad);
            }
        }
        3 | 4 => {
            if q < 2 || p <= q || n < p + 1 {
                return Err(bad);
            }
        }
        _ => return Err(bad),
    }
    match relation {
        1 => {
            // Ad(e^{-phi l3}) l_{q^2+1} = cos(phi) l_{q^2+1} - sin(phi) l_{q^2}
            let lhs = adjoint(&phase3(n, -phi), &lambda(n, q * q + 1)?);
            let rhs = lambda(n, q * q + 1)?.map(|z| z * phi.cos())
                - lambda(n, q * q)?.map(|z| z * phi.sin());
            Ok(frobenius(&(lhs - rhs)))
        }
        2 => {
            // Projections of Ad(e^{-phi l3} e^{-psi l_{q^2+1}}) l3 onto the
            // two band generators; the diagonal remainder is not constrained.
            let x = phase3(n, -phi) * plane_rotation(n, 0, q, -psi);
            let moved = adjoint(&x, &lambda(n, 3)?);
            let mut worst: f64 = 0.0;
            for (idx, target) in [
                (q * q, psi.cos() * psi.sin() * phi.cos()),
                (q * q + 1, psi.cos() * psi.sin() * phi.sin()),
            ] {
                let g = lambda(n, idx)?;
                let proj = (&moved * &g).trace().re / (&g * &g).trace().re;
                worst = worst.max((proj - target).abs());
            }
            Ok(worst)
        }
        3 => {
            let x = plane_rotation(n, 0, p, psi) * phase3(n, phi);
            let lhs = adjoint(&x, &lambda(n, q * q)?);
            let rhs = (lambda(n, q * q)?.map(|z| z * phi.cos())
                - lambda(n, q * q + 1)?.map(|z| z * phi.sin()))
            .map(|z| z * psi.cos())
                - (lambda(n, p * p + 2 * q)?.map(|z| z * phi.cos())
                    + lambda(n, p * p + 2 * q + 1)?.map(|z| z * phi.sin()))
                .map(|z| z * psi.sin());
            Ok(frobenius(&(lhs - rhs)))
        }
        4 => {
            let x = plane_rotation(n, 0, p, psi) * phase3(n, phi);
            let lhs = adjoint(&x, &lambda(n, q * q + 1)?);
            let rhs = (lambda(n, q * q)?.map(|z| z * phi.sin())
                + lambda(n, q * q + 1)?.map(|z| z * phi.cos()))
            .map(|z| z * psi.cos())
                + (lambda(n, p * p + 2 * q)?.map(|z| z * -phi.sin())
                    + lambda(n, p * p + 2 * q + 1)?.map(|z| z * phi.cos()))
                .map(|z| z * psi.sin());
            Ok(frobenius(&(lhs - rhs)))
        }
        _ => unreachable!(),
    }
}

/// {"n": N, "entries": [[re, im], ...]} row-major.
pub fn matrix_to_json(m: &CMatrix) -> Value {
    let entries: Vec<Value> = (0..m.nrows())
        .flat_map(|r| (0..m.ncols()).map(move |c| (r, c)))
        .map(|(r, c)| json!([m[(r, c)].re, m[(r, c)].im]))
        .collect();
    json!({ "n": m.nrows(), "entries": entries })
}

pub fn matrix_from_json(v: &Value) -> Option<CMatrix> {
    let n = v.get("n")?.as_u64()? as usize;
    let entries = v.get("entries")?.as_array()?;
    if entries.len() != n * n {
        return None;
    }
    let mut m = CMatrix::zeros(n, n);
    for (idx, e) in entries.iter().enumerate() {
        let pair = e.as_array()?;
        if pair.len() != 2 {
            return None;
        }
        m[(idx / n, idx % n)] = Complex64::new(pair[0].as_f64()?, pair[1].as_f64()?);
    }
    Some(m)
}

/// Largest absolute entry of (M^H M - I); zero for unitary input.
pub fn unitarity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let d = m.adjoint() * m - CMatrix::identity(n, n);
    d.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn det(m: &CMatrix) -> Complex64 {
    m.clone().lu().determinant()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn is_anti_hermitian(m: &CMatrix) -> bool {
        frobenius(&(m.adjoint() + m)) < 1e-14
    }

    #[test]
    fn low_rank_displays() {
        let l1 = lambda(2, 1).unwrap();
        assert_eq!(l1[(0, 1)], I);
        assert_eq!(l1[(1, 0)], I);
        let l2 = lambda(2, 2).unwrap();
        assert_eq!(l2[(0, 1)], Complex64::new(1.0, 0.0));
        assert_eq!(l2[(1, 0)], Complex64::new(-1.0, 0.0));
        let l3 = lambda(2, 3).unwrap();
        assert_eq!(l3[(0, 0)], I);
        assert_eq!(l3[(1, 1)], -I);
        let l8 = lambda(3, 8).unwrap();
        assert_eq!(l8[(0, 0)], I);
        assert_eq!(l8[(1, 1)], I);
        assert_eq!(l8[(2, 2)], -I * 2.0);
        let l6 = lambda(3, 6).unwrap();
        assert_eq!(l6[(1, 2)], I);
        assert_eq!(l6[(2, 1)], I);
    }

    #[test]
    fn basis_is_anti_hermitian_traceless() {
        for n in 2..=5 {
            for j in 1..=(n * n - 1) {
                let l = lambda(n, j).unwrap();
                assert!(is_anti_hermitian(&l), "n={n} j={j}");
                assert!(l.trace().norm() < 1e-14, "n={n} j={j}");
            }
        }
    }

    #[test]
    fn pairing_is_diagonal() {
        for n in 2..=4 {
            for j in 1..=(n * n - 1) {
                for k in 1..=(n * n - 1) {
                    let t = trace_pairing(n, j, k).unwrap();
                    if j != k {
                        assert!(t.abs() < 1e-14, "n={n} {j},{k}");
                    } else {
                        assert!(t < 0.0, "n={n} {j}");
                    }
                }
            }
        }
        assert_eq!(trace_pairing(2, 1, 1).unwrap(), -2.0);
        assert_eq!(trace_pairing(3, 8, 8).unwrap(), -6.0);
        assert_eq!(trace_pairing(4, 15, 15).unwrap(), -12.0);
    }

    #[test]
    fn exp_closed_forms() {
        // frozen: exp(lambda_5 * pi/2) on 3x3 swaps rows 1 and 3
        let m = exp_generator(3, 5, std::f64::consts::FRAC_PI_2).unwrap();
        let expect = [
            [0.0, 0.0, 1.0],
            [0.0, 1.0, 0.0],
            [-1.0, 0.0, 0.0],
        ];
        for r in 0..3 {
            for c in 0..3 {
                assert!((m[(r, c)] - Complex64::new(expect[r][c], 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn exp_is_unitary_det_one() {
        for n in 2..=4 {
            let mut indices: Vec<usize> = vec![3, n * n - 1];
            for k in 1..n {
                indices.push(k * k + 1);
            }
            for j in indices {
                for t in [0.3, 1.1, -2.2] {
                    let m = exp_generator(n, j, t).unwrap();
                    assert!(unitarity_defect(&m) < 1e-12, "n={n} j={j}");
                    assert!((det(&m) - Complex64::new(1.0, 0.0)).norm() < 1e-12);
                    // one-parameter subgroup
                    let s = 0.7;
                    let lhs = exp_generator(n, j, t + s).unwrap();
                    let rhs = exp_generator(n, j, t).unwrap() * exp_generator(n, j, s).unwrap();
                    assert!(frobenius(&(lhs - rhs)) < 1e-12);
                }
            }
        }
    }

    #[test]
    fn exp_matches_series() {
        // spot-check the closed forms against a truncated exponential series
        for (n, j) in [(2, 3), (3, 5), (3, 8), (4, 10)] {
            let t = 0.83;
            let l = lambda(n, j).unwrap().map(|z| z * t);
            let mut series = CMatrix::identity(n, n);
            let mut term = CMatrix::identity(n, n);
            for k in 1..30 {
                term = &term * &l / Complex64::new(k as f64, 0.0);
                series += &term;
            }
            let closed = exp_generator(n, j, t).unwrap();
            assert!(frobenius(&(closed - series)) < 1e-12, "n={n} j={j}");
        }
    }

    #[test]
    fn adjoint_relations_hold() {
        let angle_pairs = [(0.4, 1.1), (2.7, 0.3), (5.9, 1.4)];
        for (phi, psi) in angle_pairs {
            for n in 3..=5 {
                for q in 2..n {
                    assert!(ad_relation_residual(1, 0, q, n, (phi, psi)).unwrap() < 1e-12);
                    assert!(ad_relation_residual(2, 0, q, n, (phi, psi)).unwrap() < 1e-12);
                    for p in (q + 1)..n {
                        assert!(ad_relation_residual(3, p, q, n, (phi, psi)).unwrap() < 1e-12);
                        assert!(ad_relation_residual(4, p, q, n, (phi, psi)).unwrap() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn errors_on_bad_indices() {
        assert!(matches!(
            lambda(3, 9),
            Err(GeneratorError::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            lambda(3, 0),
            Err(GeneratorError::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            exp_generator(3, 4, 0.5),
            Err(GeneratorError::UnsupportedIndex { .. })
        ));
        assert!(matches!(
            ad_relation_residual(3, 2, 2, 4, (0.1, 0.2)),
            Err(GeneratorError::InvalidCombination { .. })
        ));
        assert!(matches!(
            ad_relation_residual(5, 3, 2, 4, (0.1, 0.2)),
            Err(GeneratorError::InvalidCombination { .. })
        ));
    }

    #[test]
    fn matrix_json_round_trip() {
        let m = exp_generator(3, 8, 0.9).unwrap();
        let j = matrix_to_json(&m);
        let back = matrix_from_json(&j).unwrap();
        assert!(frobenius(&(m - back)) < 1e-15);
    }
}
